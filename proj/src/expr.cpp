#include "mwpr/expr.hpp"

#include "mwpr/errors.hpp"
#include "mwpr/util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <utility>

namespace mwpr {

ExprNode make_number(std::string lexeme, bool percent) {
    ExprNode n;
    n.kind = NodeKind::Number;
    n.value = std::move(lexeme);
    n.percent = percent;
    return n;
}

ExprNode make_variable(std::string name) {
    ExprNode n;
    n.kind = NodeKind::Variable;
    n.value = std::move(name);
    return n;
}

ExprNode make_binary(OpCode op, ExprNode lhs, ExprNode rhs) {
    ExprNode n;
    n.kind = NodeKind::BinaryOp;
    n.op = op;
    n.children.push_back(std::move(lhs));
    n.children.push_back(std::move(rhs));
    return n;
}

ExprNode make_negate(ExprNode operand) {
    ExprNode n;
    n.kind = NodeKind::UnaryOp;
    n.op = OpCode::Neg;
    n.children.push_back(std::move(operand));
    return n;
}

const char* op_name(OpCode op) {
    switch (op) {
        case OpCode::Add: return "add";
        case OpCode::Sub: return "sub";
        case OpCode::Mul: return "mul";
        case OpCode::Div: return "div";
        case OpCode::Pow: return "pow";
        case OpCode::Neg: return "neg";
    }
    return "?";
}

namespace {

enum class TokKind { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Token {
    TokKind kind;
    std::string text;
    bool percent = false;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ >= src_.size()) return {TokKind::End, ""};
        char c = src_[pos_];
        switch (c) {
            case '+': ++pos_; return {TokKind::Plus, "+"};
            case '-': ++pos_; return {TokKind::Minus, "-"};
            case '*': ++pos_; return {TokKind::Star, "*"};
            case '/': ++pos_; return {TokKind::Slash, "/"};
            case '^': ++pos_; return {TokKind::Caret, "^"};
            case '(': ++pos_; return {TokKind::LParen, "("};
            case ')': ++pos_; return {TokKind::RParen, ")"};
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && pos_ + 1 < src_.size() &&
            std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            return lex_number();
        }
        if (is_ident_char(c) && !std::isdigit(static_cast<unsigned char>(c))) {
            return lex_ident();
        }
        throw UnsupportedTokenError("unsupported symbol '" + std::string(1, c) + "' in equation");
    }

private:
    Token lex_number() {
        std::size_t start = pos_;
        bool seen_dot = false;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c))) {
                ++pos_;
            } else if (c == '.' && !seen_dot) {
                seen_dot = true;
                ++pos_;
            } else {
                break;
            }
        }
        Token t{TokKind::Number, std::string(src_.substr(start, pos_ - start))};
        if (pos_ < src_.size() && src_[pos_] == '%') {
            t.percent = true;
            ++pos_;
        }
        return t;
    }

    Token lex_ident() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
        return {TokKind::Ident, std::string(src_.substr(start, pos_ - start))};
    }

    // Bytes with the high bit set are accepted as identifier characters so that
    // UTF-8 variable names in non-English corpora tokenize as single units.
    static bool is_ident_char(char c) {
        unsigned char u = static_cast<unsigned char>(c);
        return std::isalnum(u) || c == '_' || u >= 0x80;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

// Precedence-climbing parser. Levels: add/sub(1) < mul/div(2) < unary minus(3) < pow(4).
class Parser {
public:
    explicit Parser(std::string_view src) : lexer_(src) { advance(); }

    ExprNode parse() {
        if (current_.kind == TokKind::End) {
            throw SyntaxError("empty expression");
        }
        ExprNode root = parse_expr(1);
        if (current_.kind != TokKind::End) {
            if (current_.kind == TokKind::RParen) {
                throw SyntaxError("unbalanced ')'");
            }
            throw SyntaxError("unexpected token '" + current_.text + "'");
        }
        return root;
    }

private:
    static constexpr int kUnaryPrec = 3;

    ExprNode parse_expr(int min_prec) {
        ExprNode lhs = parse_prefix();
        for (;;) {
            OpCode op;
            int prec;
            if (!binary_op(current_.kind, op, prec) || prec < min_prec) break;
            advance();
            // '^' is right-associative: recurse at the same level instead of one above.
            int next_min = (op == OpCode::Pow) ? prec : prec + 1;
            ExprNode rhs = parse_expr(next_min);
            lhs = make_binary(op, std::move(lhs), std::move(rhs));
        }
        return lhs;
    }

    ExprNode parse_prefix() {
        switch (current_.kind) {
            case TokKind::Number: {
                ExprNode n = make_number(current_.text, current_.percent);
                advance();
                return n;
            }
            case TokKind::Ident: {
                ExprNode n = make_variable(current_.text);
                advance();
                return n;
            }
            case TokKind::Minus: {
                advance();
                return make_negate(parse_expr(kUnaryPrec));
            }
            case TokKind::LParen: {
                advance();
                ExprNode inner = parse_expr(1);
                if (current_.kind != TokKind::RParen) {
                    throw SyntaxError("unbalanced '('");
                }
                advance();
                return inner;
            }
            case TokKind::End:
                throw SyntaxError("dangling operator at end of expression");
            default:
                throw SyntaxError("unexpected token '" + current_.text + "'");
        }
    }

    static bool binary_op(TokKind kind, OpCode& op, int& prec) {
        switch (kind) {
            case TokKind::Plus: op = OpCode::Add; prec = 1; return true;
            case TokKind::Minus: op = OpCode::Sub; prec = 1; return true;
            case TokKind::Star: op = OpCode::Mul; prec = 2; return true;
            case TokKind::Slash: op = OpCode::Div; prec = 2; return true;
            case TokKind::Caret: op = OpCode::Pow; prec = 4; return true;
            default: return false;
        }
    }

    void advance() { current_ = lexer_.next(); }

    Lexer lexer_;
    Token current_;
};

std::string pick_equation_rhs(const std::string& text) {
    // Multi-equation solutions keep the last non-blank segment; datasets put the
    // final answer equation last.
    std::string segment;
    for (const std::string& part : split(text, ';')) {
        if (!trim(part).empty()) segment = part;
    }
    if (trim(segment).empty()) {
        throw SyntaxError("empty equation");
    }
    std::size_t eq = segment.find('=');
    if (eq != std::string::npos) {
        segment = segment.substr(eq + 1);
    }
    if (trim(segment).empty()) {
        throw SyntaxError("empty right-hand side");
    }
    return segment;
}

}  // namespace

ComputationalGraph parse_equation(const std::string& text) {
    if (text.empty()) {
        throw SyntaxError("empty equation");
    }
    ComputationalGraph g;
    g.root = Parser(pick_equation_rhs(text)).parse();
    g.signature = canonical_signature(g.root);
    g.source_equation = text;
    return g;
}

std::string postfix(const ExprNode& node) {
    switch (node.kind) {
        case NodeKind::Number: return node.percent ? node.value + "%" : node.value;
        case NodeKind::Variable: return node.value;
        case NodeKind::UnaryOp: return postfix(node.children[0]) + " " + op_name(node.op);
        case NodeKind::BinaryOp:
            return postfix(node.children[0]) + " " + postfix(node.children[1]) + " " + op_name(node.op);
    }
    return {};
}

std::string infix(const ExprNode& node) {
    switch (node.kind) {
        case NodeKind::Number: return node.percent ? node.value + "%" : node.value;
        case NodeKind::Variable: return node.value;
        case NodeKind::UnaryOp: return "(-" + infix(node.children[0]) + ")";
        case NodeKind::BinaryOp: {
            char op = '?';
            switch (node.op) {
                case OpCode::Add: op = '+'; break;
                case OpCode::Sub: op = '-'; break;
                case OpCode::Mul: op = '*'; break;
                case OpCode::Div: op = '/'; break;
                case OpCode::Pow: op = '^'; break;
                case OpCode::Neg: break;
            }
            return "(" + infix(node.children[0]) + op + infix(node.children[1]) + ")";
        }
    }
    return {};
}

std::string canonical_signature(const ExprNode& node) {
    switch (node.kind) {
        case NodeKind::Number: return "#";
        case NodeKind::Variable: return "v";
        case NodeKind::UnaryOp: return canonical_signature(node.children[0]) + " neg";
        case NodeKind::BinaryOp: {
            std::string left = canonical_signature(node.children[0]);
            std::string right = canonical_signature(node.children[1]);
            if ((node.op == OpCode::Add || node.op == OpCode::Mul) && right < left) {
                std::swap(left, right);
            }
            return left + " " + right + " " + op_name(node.op);
        }
    }
    return {};
}

double evaluate_expression(const ExprNode& node) {
    switch (node.kind) {
        case NodeKind::Number: {
            double v = std::strtod(node.value.c_str(), nullptr);
            return node.percent ? v * 0.01 : v;
        }
        case NodeKind::Variable:
            throw ContainsVariableError(node.value);
        case NodeKind::UnaryOp:
            return -evaluate_expression(node.children[0]);
        case NodeKind::BinaryOp: {
            double lhs = evaluate_expression(node.children[0]);
            double rhs = evaluate_expression(node.children[1]);
            switch (node.op) {
                case OpCode::Add: return lhs + rhs;
                case OpCode::Sub: return lhs - rhs;
                case OpCode::Mul: return lhs * rhs;
                case OpCode::Div:
                    if (rhs == 0.0) throw DivisionByZeroError();
                    return lhs / rhs;
                case OpCode::Pow: {
                    if (lhs == 0.0 && rhs < 0.0) throw DomainError("zero raised to a negative power");
                    double v = std::pow(lhs, rhs);
                    if (std::isnan(v)) throw DomainError("power with no real value");
                    return v;
                }
                case OpCode::Neg: break;
            }
            break;
        }
    }
    throw Error("malformed expression node");
}

double evaluate_expression(const ComputationalGraph& g) { return evaluate_expression(g.root); }

int levenshtein(const std::string& a, const std::string& b) {
    const std::vector<std::string> ta = split_whitespace(a);
    const std::vector<std::string> tb = split_whitespace(b);
    const std::size_t m = ta.size();
    const std::size_t n = tb.size();
    if (m == 0) return static_cast<int>(n);
    if (n == 0) return static_cast<int>(m);

    std::vector<int> row(n + 1);
    for (std::size_t j = 0; j <= n; ++j) row[j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= m; ++i) {
        int diagonal = row[0];
        row[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= n; ++j) {
            int up = row[j];
            if (ta[i - 1] == tb[j - 1]) {
                row[j] = diagonal;
            } else {
                row[j] = std::min({row[j - 1], up, diagonal}) + 1;
            }
            diagonal = up;
        }
    }
    return row[n];
}

double signature_similarity(const std::string& sig_a, const std::string& sig_b) {
    const std::size_t la = split_whitespace(sig_a).size();
    const std::size_t lb = split_whitespace(sig_b).size();
    if (la == 0 && lb == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(sig_a, sig_b)) / static_cast<double>(std::max(la, lb));
}

double graph_similarity(const ComputationalGraph& a, const ComputationalGraph& b) {
    return signature_similarity(a.signature, b.signature);
}

}  // namespace mwpr
