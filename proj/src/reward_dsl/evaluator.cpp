#include "chatpcg/reward_dsl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chatpcg::dsl {

namespace {

struct Arity {
    std::string_view name;
    std::size_t min_args;
    std::size_t max_args;  // 0 = unbounded
};

constexpr Arity kBuiltins[] = {
    {"abs", 1, 1},  {"sqrt", 1, 1}, {"exp", 1, 1},  {"log", 1, 1},  {"clamp", 3, 3},
    {"min", 2, 0},  {"max", 2, 0},  {"mean", 1, 0}, {"std", 1, 0},
};

const Arity* find_builtin(std::string_view name) {
    for (const Arity& a : kBuiltins) {
        if (a.name == name) return &a;
    }
    return nullptr;
}

std::string arity_message(const Arity& a, std::size_t got) {
    std::string expected;
    if (a.max_args == a.min_args) {
        expected = std::to_string(a.min_args);
    } else {
        expected = "at least " + std::to_string(a.min_args);
    }
    return std::string(a.name) + " expects " + expected + " argument" + (a.min_args == 1 && a.max_args == 1 ? "" : "s") +
           ", got " + std::to_string(got);
}

void check_expr(const Expr& e, const RewardModule& m, const VariableCatalog& catalog, std::vector<Diagnostic>& out) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, VarRef>) {
                if (!catalog.find(n.name)) {
                    out.push_back({DiagnosticKind::UnknownIdentifier, m.name, n.name, e.pos,
                                   "unknown identifier '" + n.name + "' in module '" + m.name + "'"});
                }
            } else if constexpr (std::is_same_v<T, Unary>) {
                check_expr(*n.operand, m, catalog, out);
            } else if constexpr (std::is_same_v<T, Binary>) {
                check_expr(*n.lhs, m, catalog, out);
                check_expr(*n.rhs, m, catalog, out);
            } else if constexpr (std::is_same_v<T, Call>) {
                const Arity* a = find_builtin(n.function);
                if (!a) {
                    out.push_back({DiagnosticKind::UnknownFunction, m.name, n.function, e.pos,
                                   "unknown function '" + n.function + "' in module '" + m.name + "'"});
                } else if (n.args.size() < a->min_args || (a->max_args != 0 && n.args.size() > a->max_args)) {
                    out.push_back({DiagnosticKind::Arity, m.name, n.function, e.pos,
                                   arity_message(*a, n.args.size()) + " in module '" + m.name + "'"});
                }
                for (const auto& arg : n.args) check_expr(*arg, m, catalog, out);
            } else if constexpr (std::is_same_v<T, IfExpr>) {
                check_expr(*n.condition, m, catalog, out);
                check_expr(*n.then_branch, m, catalog, out);
                check_expr(*n.else_branch, m, catalog, out);
            }
        },
        e.node);
}

class Evaluator {
public:
    Evaluator(const Bindings& bindings, const std::string& module) : bindings_(bindings), module_(module) {}

    double number(const Expr& e) const {
        return std::visit(
            [&](const auto& n) -> double {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, NumberLit>) {
                    return n.value;
                } else if constexpr (std::is_same_v<T, VarRef>) {
                    const auto v = bindings_.get(n.name);
                    if (!v) fail("lookup", "unbound identifier '" + n.name + "'");
                    if (!std::isfinite(*v)) fail("lookup", "identifier '" + n.name + "' is not finite");
                    return *v;
                } else if constexpr (std::is_same_v<T, Unary>) {
                    return -number(*n.operand);
                } else if constexpr (std::is_same_v<T, Binary>) {
                    return arithmetic(n);
                } else if constexpr (std::is_same_v<T, Call>) {
                    return call(n);
                } else {
                    return truth(*n.condition) ? number(*n.then_branch) : number(*n.else_branch);
                }
            },
            e.node);
    }

private:
    bool truth(const Expr& e) const {
        if (const auto* u = std::get_if<Unary>(&e.node)) return !truth(*u->operand);
        const auto& b = std::get<Binary>(e.node);
        switch (b.op) {
            case BinaryOp::And: return truth(*b.lhs) && truth(*b.rhs);
            case BinaryOp::Or: return truth(*b.lhs) || truth(*b.rhs);
            default: break;
        }
        const double l = number(*b.lhs);
        const double r = number(*b.rhs);
        switch (b.op) {
            case BinaryOp::Less: return l < r;
            case BinaryOp::LessEq: return l <= r;
            case BinaryOp::Greater: return l > r;
            case BinaryOp::GreaterEq: return l >= r;
            case BinaryOp::Equal: return l == r;
            default: fail("condition", "malformed condition");
        }
    }

    double arithmetic(const Binary& b) const {
        const double l = number(*b.lhs);
        const double r = number(*b.rhs);
        double v = 0.0;
        switch (b.op) {
            case BinaryOp::Add: v = l + r; break;
            case BinaryOp::Sub: v = l - r; break;
            case BinaryOp::Mul: v = l * r; break;
            case BinaryOp::Div:
                if (r == 0.0) fail("/", "division by zero");
                v = l / r;
                break;
            default: fail(std::string(to_string(b.op)), "condition used as a number");
        }
        return finite(v, to_string(b.op));
    }

    double call(const Call& c) const {
        const Arity* a = find_builtin(c.function);
        if (!a) fail(c.function, "unknown function '" + c.function + "'");
        if (c.args.size() < a->min_args || (a->max_args != 0 && c.args.size() > a->max_args)) {
            fail(c.function, arity_message(*a, c.args.size()));
        }
        std::vector<double> x;
        x.reserve(c.args.size());
        for (const auto& arg : c.args) x.push_back(number(*arg));
        const std::string_view f = c.function;
        double v = 0.0;
        if (f == "abs") {
            v = std::fabs(x[0]);
        } else if (f == "sqrt") {
            if (x[0] < 0.0) fail("sqrt", "sqrt of negative value");
            v = std::sqrt(x[0]);
        } else if (f == "exp") {
            v = std::exp(x[0]);
        } else if (f == "log") {
            if (x[0] <= 0.0) fail("log", "log of non-positive value");
            v = std::log(x[0]);
        } else if (f == "clamp") {
            if (x[1] > x[2]) fail("clamp", "clamp lower bound exceeds upper bound");
            v = std::clamp(x[0], x[1], x[2]);
        } else if (f == "min") {
            v = *std::min_element(x.begin(), x.end());
        } else if (f == "max") {
            v = *std::max_element(x.begin(), x.end());
        } else if (f == "mean" || f == "std") {
            double mu = 0.0;
            for (double xi : x) mu += xi;
            mu /= static_cast<double>(x.size());
            if (f == "mean") {
                v = mu;
            } else {
                double ss = 0.0;
                for (double xi : x) ss += (xi - mu) * (xi - mu);
                v = std::sqrt(ss / static_cast<double>(x.size()));
            }
        }
        return finite(v, f);
    }

    double finite(double v, std::string_view op) const {
        if (!std::isfinite(v)) fail(std::string(op), "non-finite result in '" + std::string(op) + "'");
        return v;
    }

    [[noreturn]] void fail(std::string op, const std::string& message) const {
        throw EvalError(module_, std::move(op), message);
    }

    const Bindings& bindings_;
    const std::string& module_;
};

}  // namespace

// ---------------------------------------------------------------------------

std::vector<Diagnostic> validate(const RewardProgram& program, const VariableCatalog& catalog) {
    std::vector<Diagnostic> out;
    if (program.modules.empty()) {
        out.push_back({DiagnosticKind::Empty, "", "", {}, "program has no modules"});
    }
    for (const RewardModule& m : program.modules) {
        if (!std::isfinite(m.weight)) {
            out.push_back({DiagnosticKind::BadWeight, m.name, "", m.pos, "weight of module '" + m.name + "' is not finite"});
        }
        if (m.body) check_expr(*m.body, m, catalog, out);
    }
    return out;
}

std::vector<Diagnostic> validate(const RewardProgram& program, const RewardConstraints& constraints) {
    return validate(program, constraints.catalog);
}

std::string format_diagnostics(const std::vector<Diagnostic>& diagnostics) {
    std::string out;
    for (const Diagnostic& d : diagnostics) {
        out += "- line " + std::to_string(d.pos.line) + ", column " + std::to_string(d.pos.column) + ": " + d.message +
               "\n";
    }
    return out;
}

std::optional<double> Bindings::get(std::string_view name) const {
    const auto it = values_.find(name);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

Bindings bind_row(const PlaytestValues& values, const VariableCatalog& catalog) {
    Bindings b;
    const auto& names = playtest_variable_names();
    for (std::size_t i = 0; i < kNumPlaytestVariables; ++i) b.set(names[i], values[i]);
    for (const CatalogEntry& e : catalog.entries()) {
        if (e.constant) b.set(e.name, *e.constant);
    }
    return b;
}

EvalError::EvalError(std::string module, std::string operation, const std::string& message)
    : std::runtime_error("module '" + module + "': " + message), module_(std::move(module)),
      operation_(std::move(operation)) {}

ProgramValue evaluate_program(const RewardProgram& program, const Bindings& bindings) {
    ProgramValue out;
    out.module_values.reserve(program.modules.size());
    for (const RewardModule& m : program.modules) {
        const double v = Evaluator(bindings, m.name).number(*m.body);
        out.module_values.push_back(v);
        out.total += m.weight * v;
    }
    if (!std::isfinite(out.total)) throw EvalError(program.name, "total", "non-finite weighted total");
    return out;
}

Stats describe(std::span<const double> values) {
    Stats s;
    if (values.empty()) return s;
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (double v : values) {
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
        sum += v;
    }
    if (s.min == s.max) {
        s.mean = s.min;
        s.std = 0.0;
        return s;
    }
    s.mean = std::clamp(sum / static_cast<double>(values.size()), s.min, s.max);
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size()));
    return s;
}

ModuleEvalReport evaluate_batch(const RewardProgram& program, std::span<const PlaytestRow> rows,
                                const RewardConstraints& constraints) {
    ModuleEvalReport report;
    report.n_rows = static_cast<int>(rows.size());
    std::vector<std::vector<double>> per_module(program.modules.size());
    std::vector<double> totals;
    for (const PlaytestRow& row : rows) {
        try {
            const ProgramValue v = evaluate_program(program, bind_row(row.values, constraints.catalog));
            for (std::size_t j = 0; j < v.module_values.size(); ++j) per_module[j].push_back(v.module_values[j]);
            totals.push_back(v.total);
            if (v.total < constraints.lo || v.total > constraints.hi) ++report.range_violations;
        } catch (const EvalError& e) {
            if (report.error_rows == 0) report.first_error = e.what();
            ++report.error_rows;
        }
    }
    for (std::size_t j = 0; j < program.modules.size(); ++j) {
        report.modules.push_back({program.modules[j].name, describe(per_module[j])});
    }
    report.total = describe(totals);
    return report;
}

namespace {

nlohmann::json stats_json(const Stats& s) {
    return {{"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"std", s.std}};
}

Stats stats_from(const nlohmann::json& j) {
    return {j.at("min").get<double>(), j.at("max").get<double>(), j.at("mean").get<double>(),
            j.at("std").get<double>()};
}

}  // namespace

nlohmann::json to_json(const ModuleEvalReport& report) {
    nlohmann::json modules = nlohmann::json::array();
    for (const auto& m : report.modules) modules.push_back({{"name", m.name}, {"stats", stats_json(m.stats)}});
    return {{"modules", modules},
            {"total", stats_json(report.total)},
            {"n_rows", report.n_rows},
            {"range_violations", report.range_violations},
            {"error_rows", report.error_rows},
            {"first_error", report.first_error}};
}

ModuleEvalReport report_from_json(const nlohmann::json& j) {
    ModuleEvalReport r;
    for (const auto& m : j.at("modules")) r.modules.push_back({m.at("name").get<std::string>(), stats_from(m.at("stats"))});
    r.total = stats_from(j.at("total"));
    r.n_rows = j.at("n_rows").get<int>();
    r.range_violations = j.at("range_violations").get<int>();
    r.error_rows = j.at("error_rows").get<int>();
    r.first_error = j.at("first_error").get<std::string>();
    return r;
}

}  // namespace chatpcg::dsl
