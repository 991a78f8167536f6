#include "chatpcg/reward_dsl.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <unordered_set>

namespace chatpcg::dsl {

namespace {

std::string join_expected(const std::vector<std::string>& expected) {
    std::string out;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i > 0) out += i + 1 == expected.size() ? " or " : ", ";
        out += expected[i];
    }
    return out;
}

}  // namespace

ParseError::ParseError(SourcePos pos, const std::string& message, std::vector<std::string> expected)
    : std::runtime_error(std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + message +
                         (expected.empty() ? std::string() : " (expected " + join_expected(expected) + ")")),
      pos_(pos),
      message_(message),
      expected_(std::move(expected)) {}

std::string_view to_string(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return "+";
        case BinaryOp::Sub: return "-";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
        case BinaryOp::Less: return "<";
        case BinaryOp::LessEq: return "<=";
        case BinaryOp::Greater: return ">";
        case BinaryOp::GreaterEq: return ">=";
        case BinaryOp::Equal: return "==";
        case BinaryOp::And: return "and";
        case BinaryOp::Or: return "or";
    }
    return "?";
}

const RewardModule* RewardProgram::find(std::string_view module_name) const {
    for (const auto& m : modules) {
        if (m.name == module_name) return &m;
    }
    return nullptr;
}

std::vector<std::string> RewardProgram::module_names() const {
    std::vector<std::string> out;
    out.reserve(modules.size());
    for (const auto& m : modules) out.push_back(m.name);
    return out;
}

bool same_structure(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index()) return false;
    auto same_ptr = [](const ExprPtr& x, const ExprPtr& y) { return x && y && same_structure(*x, *y); };
    return std::visit(
        [&](const auto& lhs) -> bool {
            using T = std::decay_t<decltype(lhs)>;
            const T& rhs = std::get<T>(b.node);
            if constexpr (std::is_same_v<T, NumberLit>) {
                return lhs.value == rhs.value;
            } else if constexpr (std::is_same_v<T, VarRef>) {
                return lhs.name == rhs.name;
            } else if constexpr (std::is_same_v<T, Unary>) {
                return lhs.op == rhs.op && same_ptr(lhs.operand, rhs.operand);
            } else if constexpr (std::is_same_v<T, Binary>) {
                return lhs.op == rhs.op && same_ptr(lhs.lhs, rhs.lhs) && same_ptr(lhs.rhs, rhs.rhs);
            } else if constexpr (std::is_same_v<T, Call>) {
                if (lhs.function != rhs.function || lhs.args.size() != rhs.args.size()) return false;
                for (std::size_t i = 0; i < lhs.args.size(); ++i) {
                    if (!same_ptr(lhs.args[i], rhs.args[i])) return false;
                }
                return true;
            } else {
                return same_ptr(lhs.condition, rhs.condition) && same_ptr(lhs.then_branch, rhs.then_branch) &&
                       same_ptr(lhs.else_branch, rhs.else_branch);
            }
        },
        a.node);
}

bool same_structure(const RewardProgram& a, const RewardProgram& b) {
    if (a.modules.size() != b.modules.size()) return false;
    for (std::size_t i = 0; i < a.modules.size(); ++i) {
        const RewardModule& x = a.modules[i];
        const RewardModule& y = b.modules[i];
        if (x.name != y.name || x.insight_text != y.insight_text || x.weight != y.weight) return false;
        if (!x.body || !y.body || !same_structure(*x.body, *y.body)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok : std::uint8_t {
    End,
    Ident,
    Number,
    KwModule,
    KwWeight,
    KwIf,
    KwAnd,
    KwOr,
    KwNot,
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    Colon,
    Less,
    LessEq,
    Greater,
    GreaterEq,
    EqEq,
};

std::string describe(Tok t) {
    switch (t) {
        case Tok::End: return "end of input";
        case Tok::Ident: return "IDENT";
        case Tok::Number: return "NUMBER";
        case Tok::KwModule: return "'module'";
        case Tok::KwWeight: return "'weight'";
        case Tok::KwIf: return "'if'";
        case Tok::KwAnd: return "'and'";
        case Tok::KwOr: return "'or'";
        case Tok::KwNot: return "'not'";
        case Tok::Plus: return "'+'";
        case Tok::Minus: return "'-'";
        case Tok::Star: return "'*'";
        case Tok::Slash: return "'/'";
        case Tok::LParen: return "'('";
        case Tok::RParen: return "')'";
        case Tok::Comma: return "','";
        case Tok::Colon: return "':'";
        case Tok::Less: return "'<'";
        case Tok::LessEq: return "'<='";
        case Tok::Greater: return "'>'";
        case Tok::GreaterEq: return "'>='";
        case Tok::EqEq: return "'=='";
    }
    return "?";
}

struct Token {
    Tok kind = Tok::End;
    SourcePos pos;
    std::string text;
    double number = 0.0;
};

struct Comment {
    int line = 0;
    std::string text;
};

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    void run(std::vector<Token>& tokens, std::vector<Comment>& comments) {
        bool line_has_token = false;
        while (true) {
            skip_blanks(line_has_token);
            const SourcePos pos{line_, col_};
            if (at_end()) {
                tokens.push_back({Tok::End, pos, {}, 0.0});
                return;
            }
            const char c = peek();
            if (c == '#') {
                const std::size_t start = i_;
                while (!at_end() && peek() != '\n') advance();
                if (!line_has_token) {
                    std::string_view body = src_.substr(start + 1, i_ - start - 1);
                    if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
                    if (!body.empty() && body.back() == '\r') body.remove_suffix(1);
                    comments.push_back({pos.line, std::string(body)});
                }
                continue;
            }
            line_has_token = true;
            if (is_ident_start(c)) {
                const std::size_t start = i_;
                while (!at_end() && is_ident_char(peek())) advance();
                std::string word(src_.substr(start, i_ - start));
                tokens.push_back({keyword(word), pos, std::move(word), 0.0});
                continue;
            }
            if (is_digit(c) || (c == '.' && i_ + 1 < src_.size() && is_digit(src_[i_ + 1]))) {
                tokens.push_back(number(pos));
                continue;
            }
            advance();
            switch (c) {
                case '+': tokens.push_back({Tok::Plus, pos, "+", 0}); break;
                case '-': tokens.push_back({Tok::Minus, pos, "-", 0}); break;
                case '*': tokens.push_back({Tok::Star, pos, "*", 0}); break;
                case '/': tokens.push_back({Tok::Slash, pos, "/", 0}); break;
                case '(': tokens.push_back({Tok::LParen, pos, "(", 0}); break;
                case ')': tokens.push_back({Tok::RParen, pos, ")", 0}); break;
                case ',': tokens.push_back({Tok::Comma, pos, ",", 0}); break;
                case ':': tokens.push_back({Tok::Colon, pos, ":", 0}); break;
                case '<':
                    if (!at_end() && peek() == '=') {
                        advance();
                        tokens.push_back({Tok::LessEq, pos, "<=", 0});
                    } else {
                        tokens.push_back({Tok::Less, pos, "<", 0});
                    }
                    break;
                case '>':
                    if (!at_end() && peek() == '=') {
                        advance();
                        tokens.push_back({Tok::GreaterEq, pos, ">=", 0});
                    } else {
                        tokens.push_back({Tok::Greater, pos, ">", 0});
                    }
                    break;
                case '=':
                    if (!at_end() && peek() == '=') {
                        advance();
                        tokens.push_back({Tok::EqEq, pos, "==", 0});
                        break;
                    }
                    throw ParseError(pos, "unexpected character '='", {"'=='"});
                default: {
                    const auto byte = static_cast<unsigned char>(c);
                    std::string shown = (byte >= 0x20 && byte < 0x7F) ? std::string(1, c)
                                                                        : "\\x" + to_hex(byte);
                    throw ParseError(pos, "unexpected character '" + shown + "'");
                }
            }
        }
    }

private:
    static std::string to_hex(unsigned char b) {
        static constexpr char kDigits[] = "0123456789abcdef";
        return {kDigits[b >> 4], kDigits[b & 0xF]};
    }

    static Tok keyword(const std::string& w) {
        if (w == "module") return Tok::KwModule;
        if (w == "weight") return Tok::KwWeight;
        if (w == "if") return Tok::KwIf;
        if (w == "and") return Tok::KwAnd;
        if (w == "or") return Tok::KwOr;
        if (w == "not") return Tok::KwNot;
        return Tok::Ident;
    }

    Token number(SourcePos pos) {
        const std::size_t start = i_;
        while (!at_end() && is_digit(peek())) advance();
        if (!at_end() && peek() == '.') {
            advance();
            while (!at_end() && is_digit(peek())) advance();
        }
        if (!at_end() && (peek() == 'e' || peek() == 'E')) {
            std::size_t j = i_ + 1;
            if (j < src_.size() && (src_[j] == '+' || src_[j] == '-')) ++j;
            if (j < src_.size() && is_digit(src_[j])) {
                while (i_ < j) advance();
                while (!at_end() && is_digit(peek())) advance();
            } else {
                throw ParseError({line_, col_}, "malformed exponent in number literal", {"digit"});
            }
        }
        if (!at_end() && is_ident_char(peek())) {
            throw ParseError({line_, col_}, "unexpected character after number literal");
        }
        const std::string_view text = src_.substr(start, i_ - start);
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
            throw ParseError(pos, "number literal '" + std::string(text) + "' is out of range");
        }
        return {Tok::Number, pos, std::string(text), value};
    }

    void skip_blanks(bool& line_has_token) {
        while (!at_end()) {
            const char c = peek();
            if (c == '\n') {
                line_has_token = false;
                advance();
            } else if (c == ' ' || c == '\t' || c == '\r') {
                advance();
            } else {
                break;
            }
        }
    }

    bool at_end() const { return i_ >= src_.size(); }
    char peek() const { return src_[i_]; }
    void advance() {
        if (src_[i_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++i_;
    }

    std::string_view src_;
    std::size_t i_ = 0;
    int line_ = 1;
    int col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser

const std::vector<std::string> kExpectExpr = {"NUMBER", "IDENT", "'('", "'-'", "'if'"};

class Parser {
public:
    Parser(std::vector<Token> tokens, std::vector<Comment> comments)
        : tokens_(std::move(tokens)), comments_(std::move(comments)) {}

    std::vector<RewardModule> program() {
        std::vector<RewardModule> modules;
        std::unordered_set<std::string> seen;
        if (cur().kind != Tok::KwModule) fail_expected({"'module'"});
        while (cur().kind == Tok::KwModule) {
            RewardModule m = module();
            if (!seen.insert(m.name).second) {
                throw ParseError(m.pos, "duplicate module name '" + m.name + "'");
            }
            modules.push_back(std::move(m));
            if (cur().kind != Tok::KwModule && cur().kind != Tok::End) {
                fail("unexpected " + describe(cur().kind) + " after module body",
                     {"operator", "'module'", "end of input"});
            }
        }
        return modules;
    }

private:
    RewardModule module() {
        RewardModule m;
        m.pos = cur().pos;
        m.insight_text = insight_for(m.pos.line);
        expect(Tok::KwModule);
        m.name = expect(Tok::Ident).text;
        expect(Tok::KwWeight);
        bool negative = false;
        if (cur().kind == Tok::Minus) {
            negative = true;
            ++pos_;
        }
        const Token& w = expect(Tok::Number);
        m.weight = negative ? -w.number : w.number;
        expect(Tok::Colon);
        m.body = expression();
        if (m.body->condition) {
            throw ParseError(m.body->pos, "module body must be a numeric expression, not a condition");
        }
        return m;
    }

    // Contiguous whole-line comments ending on the line above `line`.
    std::string insight_for(int line) {
        std::vector<const Comment*> block;
        int want = line - 1;
        for (auto it = comments_.rbegin(); it != comments_.rend(); ++it) {
            if (it->line > want) continue;
            if (it->line != want) break;
            block.push_back(&*it);
            --want;
        }
        std::string text;
        for (auto it = block.rbegin(); it != block.rend(); ++it) {
            if (it != block.rbegin()) text += '\n';
            text += (*it)->text;
        }
        return text;
    }

    ExprPtr expression() { return or_expr(); }

    ExprPtr or_expr() {
        ExprPtr lhs = and_expr();
        while (cur().kind == Tok::KwOr) {
            const SourcePos at = cur().pos;
            ++pos_;
            ExprPtr rhs = and_expr();
            need_condition(*lhs, "or");
            need_condition(*rhs, "or");
            lhs = make(at, Binary{BinaryOp::Or, lhs, rhs}, true);
        }
        return lhs;
    }

    ExprPtr and_expr() {
        ExprPtr lhs = not_expr();
        while (cur().kind == Tok::KwAnd) {
            const SourcePos at = cur().pos;
            ++pos_;
            ExprPtr rhs = not_expr();
            need_condition(*lhs, "and");
            need_condition(*rhs, "and");
            lhs = make(at, Binary{BinaryOp::And, lhs, rhs}, true);
        }
        return lhs;
    }

    ExprPtr not_expr() {
        if (cur().kind == Tok::KwNot) {
            const SourcePos at = cur().pos;
            ++pos_;
            Nesting guard(*this, at);
            ExprPtr operand = not_expr();
            need_condition(*operand, "not");
            return make(at, Unary{UnaryOp::Not, operand}, true);
        }
        return relation();
    }

    ExprPtr relation() {
        ExprPtr lhs = sum();
        BinaryOp op;
        switch (cur().kind) {
            case Tok::Less: op = BinaryOp::Less; break;
            case Tok::LessEq: op = BinaryOp::LessEq; break;
            case Tok::Greater: op = BinaryOp::Greater; break;
            case Tok::GreaterEq: op = BinaryOp::GreaterEq; break;
            case Tok::EqEq: op = BinaryOp::Equal; break;
            default: return lhs;
        }
        const SourcePos at = cur().pos;
        ++pos_;
        ExprPtr rhs = sum();
        need_numeric(*lhs, to_string(op));
        need_numeric(*rhs, to_string(op));
        return make(at, Binary{op, lhs, rhs}, true);
    }

    ExprPtr sum() {
        ExprPtr lhs = product();
        while (cur().kind == Tok::Plus || cur().kind == Tok::Minus) {
            const BinaryOp op = cur().kind == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub;
            const SourcePos at = cur().pos;
            ++pos_;
            ExprPtr rhs = product();
            need_numeric(*lhs, to_string(op));
            need_numeric(*rhs, to_string(op));
            lhs = make(at, Binary{op, lhs, rhs}, false);
        }
        return lhs;
    }

    ExprPtr product() {
        ExprPtr lhs = unary();
        while (cur().kind == Tok::Star || cur().kind == Tok::Slash) {
            const BinaryOp op = cur().kind == Tok::Star ? BinaryOp::Mul : BinaryOp::Div;
            const SourcePos at = cur().pos;
            ++pos_;
            ExprPtr rhs = unary();
            need_numeric(*lhs, to_string(op));
            need_numeric(*rhs, to_string(op));
            lhs = make(at, Binary{op, lhs, rhs}, false);
        }
        return lhs;
    }

    ExprPtr unary() {
        if (cur().kind == Tok::Minus) {
            const SourcePos at = cur().pos;
            ++pos_;
            Nesting guard(*this, at);
            ExprPtr operand = unary();
            need_numeric(*operand, "unary -");
            return make(at, Unary{UnaryOp::Negate, operand}, false);
        }
        return primary();
    }

    ExprPtr primary() {
        const Token& t = cur();
        switch (t.kind) {
            case Tok::Number:
                ++pos_;
                return make(t.pos, NumberLit{t.number}, false);
            case Tok::Ident: {
                ++pos_;
                if (cur().kind != Tok::LParen) return make(t.pos, VarRef{t.text}, false);
                Nesting guard(*this, t.pos);
                ++pos_;
                std::vector<ExprPtr> args;
                if (cur().kind != Tok::RParen) {
                    while (true) {
                        ExprPtr a = expression();
                        need_numeric(*a, t.text + "()");
                        args.push_back(std::move(a));
                        if (cur().kind == Tok::Comma) {
                            ++pos_;
                            continue;
                        }
                        break;
                    }
                }
                if (cur().kind != Tok::RParen) fail_expected({"','", "')'"});
                ++pos_;
                return make(t.pos, Call{t.text, std::move(args)}, false);
            }
            case Tok::KwIf: {
                ++pos_;
                Nesting guard(*this, t.pos);
                expect(Tok::LParen);
                ExprPtr cond = expression();
                if (!cond->condition) {
                    throw ParseError(cond->pos, "first argument of if() must be a condition",
                                     {"relation (<, <=, >, >=, ==)"});
                }
                expect(Tok::Comma);
                ExprPtr a = expression();
                need_numeric(*a, "if()");
                expect(Tok::Comma);
                ExprPtr b = expression();
                need_numeric(*b, "if()");
                expect(Tok::RParen);
                return make(t.pos, IfExpr{cond, a, b}, false);
            }
            case Tok::LParen: {
                ++pos_;
                Nesting guard(*this, t.pos);
                ExprPtr inner = expression();
                expect(Tok::RParen);
                return inner;
            }
            default:
                fail_expected(kExpectExpr);
        }
    }

    struct Nesting {
        Nesting(Parser& p, SourcePos at) : parser(p) {
            if (++parser.nesting_ > kMaxAstDepth) {
                throw ParseError(at, "expression nested too deeply (limit " + std::to_string(kMaxAstDepth) + ")");
            }
        }
        ~Nesting() { --parser.nesting_; }
        Nesting(const Nesting&) = delete;
        Nesting& operator=(const Nesting&) = delete;
        Parser& parser;
    };

    static int child_depth(const Expr::Node& node) {
        return std::visit(
            [](const auto& n) -> int {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Unary>) {
                    return n.operand->depth;
                } else if constexpr (std::is_same_v<T, Binary>) {
                    return std::max(n.lhs->depth, n.rhs->depth);
                } else if constexpr (std::is_same_v<T, Call>) {
                    int d = 0;
                    for (const auto& a : n.args) d = std::max(d, a->depth);
                    return d;
                } else if constexpr (std::is_same_v<T, IfExpr>) {
                    return std::max({n.condition->depth, n.then_branch->depth, n.else_branch->depth});
                } else {
                    return 0;
                }
            },
            node);
    }

    ExprPtr make(SourcePos at, Expr::Node node, bool condition) {
        auto e = std::make_shared<Expr>();
        e->pos = at;
        e->depth = 1 + child_depth(node);
        e->condition = condition;
        e->node = std::move(node);
        if (e->depth > kMaxAstDepth) {
            throw ParseError(at, "expression tree deeper than " + std::to_string(kMaxAstDepth) + " levels");
        }
        return e;
    }

    void need_numeric(const Expr& e, std::string_view where) const {
        if (e.condition) {
            throw ParseError(e.pos, "condition used where a number is required (operand of " + std::string(where) +
                                        ")");
        }
    }

    void need_condition(const Expr& e, std::string_view where) const {
        if (!e.condition) {
            throw ParseError(e.pos, "operand of '" + std::string(where) + "' must be a condition",
                             {"relation (<, <=, >, >=, ==)"});
        }
    }

    const Token& cur() const { return tokens_[pos_]; }

    const Token& expect(Tok kind) {
        if (cur().kind != kind) fail_expected({describe(kind)});
        return tokens_[pos_++];
    }

    [[noreturn]] void fail(const std::string& message, std::vector<std::string> expected) const {
        throw ParseError(cur().pos, message, std::move(expected));
    }

    [[noreturn]] void fail_expected(std::vector<std::string> expected) const {
        const Token& t = cur();
        std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
        throw ParseError(t.pos, "unexpected " + found, std::move(expected));
    }

    std::vector<Token> tokens_;
    std::vector<Comment> comments_;
    std::size_t pos_ = 0;
    int nesting_ = 0;
};

}  // namespace

RewardProgram parse_program(std::string_view source, std::string name) {
    std::vector<Token> tokens;
    std::vector<Comment> comments;
    Lexer(source).run(tokens, comments);
    Parser parser(std::move(tokens), std::move(comments));
    RewardProgram program;
    program.name = std::move(name);
    program.modules = parser.program();
    program.source_text = std::string(source);
    return program;
}

RewardProgram scale_weights(const RewardProgram& program, double factor) {
    RewardProgram out = program;
    for (auto& m : out.modules) m.weight *= factor;
    out.source_text = print_program(out);
    return out;
}

}  // namespace chatpcg::dsl
