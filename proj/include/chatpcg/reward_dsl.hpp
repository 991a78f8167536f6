#pragma once

// Reward-program language.
//
//   program  := module+
//   module   := "module" IDENT "weight" ["-"] NUMBER ":" expr
//   expr     := or
//   or       := and ("or" and)*
//   and      := not ("and" not)*
//   not      := "not" not | relation
//   relation := sum [("<" | "<=" | ">" | ">=" | "==") sum]
//   sum      := product (("+" | "-") product)*
//   product  := unary (("*" | "/") unary)*
//   unary    := "-" unary | primary
//   primary  := NUMBER | IDENT | IDENT "(" args ")" | "if" "(" expr "," expr "," expr ")" | "(" expr ")"
//
// Conditions (relations and their and/or/not combinations) are only legal as
// the first argument of if(). A block of whole-line "#" comments directly
// above a module is kept as that module's insight text; other comments are
// discarded.

#include "chatpcg/simulator.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace chatpcg::dsl {

inline constexpr int kMaxAstDepth = 64;

struct SourcePos {
    int line = 1;
    int column = 1;
};

class ParseError : public std::runtime_error {
public:
    ParseError(SourcePos pos, const std::string& message, std::vector<std::string> expected = {});

    SourcePos pos() const noexcept { return pos_; }
    const std::string& message() const noexcept { return message_; }
    const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    SourcePos pos_;
    std::string message_;
    std::vector<std::string> expected_;
};

enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div, Less, LessEq, Greater, GreaterEq, Equal, And, Or };
enum class UnaryOp : std::uint8_t { Negate, Not };

std::string_view to_string(BinaryOp op);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct NumberLit {
    double value = 0.0;
};
struct VarRef {
    std::string name;
};
struct Unary {
    UnaryOp op;
    ExprPtr operand;
};
struct Binary {
    BinaryOp op;
    ExprPtr lhs;
    ExprPtr rhs;
};
struct Call {
    std::string function;
    std::vector<ExprPtr> args;
};
struct IfExpr {
    ExprPtr condition;
    ExprPtr then_branch;
    ExprPtr else_branch;
};

struct Expr {
    using Node = std::variant<NumberLit, VarRef, Unary, Binary, Call, IfExpr>;

    SourcePos pos;
    Node node;
    int depth = 1;
    bool condition = false;  // true for relations and and/or/not
};

// Structural equality; source positions are ignored.
bool same_structure(const Expr& a, const Expr& b);

struct RewardModule {
    std::string name;
    std::string insight_text;
    double weight = 1.0;
    ExprPtr body;
    SourcePos pos;
};

struct RewardProgram {
    std::string name = "reward";
    std::vector<RewardModule> modules;
    std::string source_text;

    const RewardModule* find(std::string_view module_name) const;
    std::vector<std::string> module_names() const;
};

bool same_structure(const RewardProgram& a, const RewardProgram& b);

// Throws ParseError (always positioned). Never recurses deeper than kMaxAstDepth.
RewardProgram parse_program(std::string_view source, std::string name = "reward");

std::string print_expr(const Expr& e);
std::string print_program(const RewardProgram& program);

// Copy of the program with every module weight multiplied by factor.
RewardProgram scale_weights(const RewardProgram& program, double factor);

// ---------------------------------------------------------------------------
// Variables and constraints

struct CatalogEntry {
    std::string name;
    std::string description;
    double lo = 0.0;
    std::optional<double> hi;  // unbounded when absent
    std::optional<double> constant;
};

class VariableCatalog {
public:
    // Throws std::invalid_argument on a duplicate or malformed name.
    void add_variable(std::string name, std::string description, double lo, std::optional<double> hi);
    void add_constant(std::string name, std::string description, double value);

    const CatalogEntry* find(std::string_view name) const;
    const std::vector<CatalogEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<CatalogEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

// The 32 playtest variables plus game-derived constants.
VariableCatalog playtest_catalog(const GameConfig& game);

struct RewardConstraints {
    double lo = -1.0;
    double hi = 1.0;
    VariableCatalog catalog;
};

enum class DiagnosticKind : std::uint8_t { UnknownIdentifier, UnknownFunction, Arity, BadWeight, Empty };

struct Diagnostic {
    DiagnosticKind kind;
    std::string module;
    std::string identifier;
    SourcePos pos;
    std::string message;
};

std::vector<Diagnostic> validate(const RewardProgram& program, const VariableCatalog& catalog);
std::vector<Diagnostic> validate(const RewardProgram& program, const RewardConstraints& constraints);
std::string format_diagnostics(const std::vector<Diagnostic>& diagnostics);

// ---------------------------------------------------------------------------
// Evaluation

class Bindings {
public:
    void set(std::string name, double value) { values_[std::move(name)] = value; }
    std::optional<double> get(std::string_view name) const;

private:
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
    };
    std::unordered_map<std::string, double, Hash, std::equal_to<>> values_;
};

// Binds the 32 playtest values and every catalog constant.
Bindings bind_row(const PlaytestValues& values, const VariableCatalog& catalog);

class EvalError : public std::runtime_error {
public:
    EvalError(std::string module, std::string operation, const std::string& message);
    const std::string& module() const noexcept { return module_; }
    const std::string& operation() const noexcept { return operation_; }

private:
    std::string module_;
    std::string operation_;
};

struct ProgramValue {
    std::vector<double> module_values;  // program module order
    double total = 0.0;
};

// total = sum_j weight_j * module_j. Throws EvalError; never returns NaN or inf.
ProgramValue evaluate_program(const RewardProgram& program, const Bindings& bindings);

struct Stats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double std = 0.0;  // population
};

Stats describe(std::span<const double> values);

struct ModuleEvalReport {
    struct ModuleStats {
        std::string name;
        Stats stats;
    };
    std::vector<ModuleStats> modules;
    Stats total;
    int n_rows = 0;
    int range_violations = 0;
    int error_rows = 0;
    std::string first_error;

    int evaluated_rows() const { return n_rows - error_rows; }
};

ModuleEvalReport evaluate_batch(const RewardProgram& program, std::span<const PlaytestRow> rows,
                                const RewardConstraints& constraints);

nlohmann::json to_json(const ModuleEvalReport& report);
ModuleEvalReport report_from_json(const nlohmann::json& j);

}  // namespace chatpcg::dsl
