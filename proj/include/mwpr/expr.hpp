#pragma once

#include <string>
#include <vector>

namespace mwpr {

enum class NodeKind { BinaryOp, UnaryOp, Number, Variable };

enum class OpCode { Add, Sub, Mul, Div, Pow, Neg };

// A node of a parsed arithmetic expression. Numbers keep their exact source
// lexeme; a '%' suffix is recorded as a flag and applied as *0.01 at evaluation.
struct ExprNode {
    NodeKind kind = NodeKind::Number;
    OpCode op = OpCode::Add;
    std::string value;  // number lexeme (without '%') or variable name
    bool percent = false;
    std::vector<ExprNode> children;
};

ExprNode make_number(std::string lexeme, bool percent = false);
ExprNode make_variable(std::string name);
ExprNode make_binary(OpCode op, ExprNode lhs, ExprNode rhs);
ExprNode make_negate(ExprNode operand);

const char* op_name(OpCode op);

// Equation solution parsed into a tree plus its canonical signature.
// Two graphs are considered equal iff their signatures are byte-equal.
struct ComputationalGraph {
    ExprNode root;
    std::string signature;
    std::string source_equation;
};

// Parses an equation-style solution text. If the text contains '=', the
// right-hand side of the first '=' is parsed; multi-equation solutions are
// split on ';' and the last non-blank equation wins. Grammar: decimal numbers
// with optional '%', identifiers, + - * / ^, unary minus, parentheses.
// Precedence ^ > unary minus > * / > + -, with '^' right-associative and the
// other binary operators left-associative.
//
// Throws SyntaxError or UnsupportedTokenError.
ComputationalGraph parse_equation(const std::string& text);

// Postfix serialization with concrete values, e.g. "5 1000 mul 2000 sub".
std::string postfix(const ExprNode& node);

// Fully parenthesized infix form that re-parses to an equivalent graph.
std::string infix(const ExprNode& node);

// Canonical postfix signature: numbers become '#', variables become 'v', and
// the children of add/mul nodes are ordered by their own signatures so that
// commuted operands produce identical strings.
std::string canonical_signature(const ExprNode& node);
inline std::string canonical_signature(const ComputationalGraph& g) { return g.signature; }

// Arithmetic value of a variable-free graph.
// Throws DivisionByZeroError, DomainError or ContainsVariableError.
double evaluate_expression(const ExprNode& node);
double evaluate_expression(const ComputationalGraph& g);

// Token-level edit distance over whitespace-separated token strings.
int levenshtein(const std::string& a, const std::string& b);

// 1 - levenshtein / max(token count); 1.0 when both are empty.
double signature_similarity(const std::string& sig_a, const std::string& sig_b);
double graph_similarity(const ComputationalGraph& a, const ComputationalGraph& b);

}  // namespace mwpr
