#include "chatpcg/reward_dsl.hpp"

#include <charconv>
#include <sstream>

namespace chatpcg::dsl {

namespace {

// Binding strength, loosest first; mirrors the grammar levels.
enum Prec : int { kOr = 1, kAnd, kNot, kRelation, kSum, kProduct, kUnary, kAtom };

int precedence(const Expr& e) {
    if (const auto* b = std::get_if<Binary>(&e.node)) {
        switch (b->op) {
            case BinaryOp::Or: return kOr;
            case BinaryOp::And: return kAnd;
            case BinaryOp::Add:
            case BinaryOp::Sub: return kSum;
            case BinaryOp::Mul:
            case BinaryOp::Div: return kProduct;
            default: return kRelation;
        }
    }
    if (const auto* u = std::get_if<Unary>(&e.node)) return u->op == UnaryOp::Not ? kNot : kUnary;
    return kAtom;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void emit(const Expr& e, std::string& out);

void emit_at_least(const Expr& e, int min_prec, std::string& out) {
    if (precedence(e) < min_prec) {
        out += '(';
        emit(e, out);
        out += ')';
    } else {
        emit(e, out);
    }
}

void emit(const Expr& e, std::string& out) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, NumberLit>) {
                out += format_number(n.value);
            } else if constexpr (std::is_same_v<T, VarRef>) {
                out += n.name;
            } else if constexpr (std::is_same_v<T, Unary>) {
                if (n.op == UnaryOp::Negate) {
                    out += '-';
                    emit_at_least(*n.operand, kUnary, out);
                } else {
                    out += "not ";
                    emit_at_least(*n.operand, kNot, out);
                }
            } else if constexpr (std::is_same_v<T, Binary>) {
                const int p = precedence(e);
                emit_at_least(*n.lhs, p == kRelation ? kSum : p, out);
                out += ' ';
                out += to_string(n.op);
                out += ' ';
                // Left-associative chains: an equal-precedence right operand needs parentheses.
                emit_at_least(*n.rhs, p == kRelation ? kSum : p + 1, out);
            } else if constexpr (std::is_same_v<T, Call>) {
                out += n.function;
                out += '(';
                for (std::size_t i = 0; i < n.args.size(); ++i) {
                    if (i > 0) out += ", ";
                    emit(*n.args[i], out);
                }
                out += ')';
            } else {
                out += "if(";
                emit(*n.condition, out);
                out += ", ";
                emit(*n.then_branch, out);
                out += ", ";
                emit(*n.else_branch, out);
                out += ')';
            }
        },
        e.node);
}

}  // namespace

std::string print_expr(const Expr& e) {
    std::string out;
    emit(e, out);
    return out;
}

std::string print_program(const RewardProgram& program) {
    std::string out;
    for (std::size_t i = 0; i < program.modules.size(); ++i) {
        const RewardModule& m = program.modules[i];
        if (i > 0) out += '\n';
        if (!m.insight_text.empty()) {
            std::istringstream lines(m.insight_text);
            std::string line;
            while (std::getline(lines, line)) out += "# " + line + "\n";
            // getline drops a trailing empty line; keep the text exact.
            if (m.insight_text.back() == '\n') out += "# \n";
        }
        out += "module " + m.name + " weight " + format_number(m.weight) + ":\n  ";
        emit(*m.body, out);
        out += '\n';
    }
    return out;
}

}  // namespace chatpcg::dsl
