#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wopt {

namespace detail {

enum class ExprKind { num, var_x, var_y, add, sub, mul, div, pow, neg, sin, cos, exp };

struct ExprNode {
  ExprKind kind;
  double value = 0.0;
  int a = -1, b = -1;
};

inline double eval_node(const std::vector<ExprNode>& nodes, int i, double x, double y) {
  const ExprNode& n = nodes[i];
  switch (n.kind) {
    case ExprKind::num: return n.value;
    case ExprKind::var_x: return x;
    case ExprKind::var_y: return y;
    case ExprKind::add: return eval_node(nodes, n.a, x, y) + eval_node(nodes, n.b, x, y);
    case ExprKind::sub: return eval_node(nodes, n.a, x, y) - eval_node(nodes, n.b, x, y);
    case ExprKind::mul: return eval_node(nodes, n.a, x, y) * eval_node(nodes, n.b, x, y);
    case ExprKind::div: return eval_node(nodes, n.a, x, y) / eval_node(nodes, n.b, x, y);
    case ExprKind::pow: return std::pow(eval_node(nodes, n.a, x, y), eval_node(nodes, n.b, x, y));
    case ExprKind::neg: return -eval_node(nodes, n.a, x, y);
    case ExprKind::sin: return std::sin(eval_node(nodes, n.a, x, y));
    case ExprKind::cos: return std::cos(eval_node(nodes, n.a, x, y));
    case ExprKind::exp: return std::exp(eval_node(nodes, n.a, x, y));
  }
  return 0.0;
}

}  // namespace detail

/// Parsed arithmetic expression over the variables x and y.
/// Grammar: + - * /, right-associative ^, unary minus, sin, cos, exp,
/// numeric literals, pi, parentheses. Unary minus binds looser than ^,
/// so -x^2 is -(x^2).
class Expr {
 public:
  Expr() = default;
  Expr(std::vector<detail::ExprNode> nodes, int root, std::string source)
      : nodes_(std::move(nodes)), root_(root), source_(std::move(source)) {}

  double eval(double x, double y) const {
    if (root_ < 0) throw std::logic_error("Expr: empty expression");
    return detail::eval_node(nodes_, root_, x, y);
  }

  const std::string& source() const { return source_; }

 private:
  std::vector<detail::ExprNode> nodes_;
  int root_ = -1;
  std::string source_;
};

/// Parse `text` into an Expr; throws std::invalid_argument with the offending
/// position on syntax errors or unknown identifiers.
inline Expr parse_expression(const std::string& text) {
  using detail::ExprKind;
  using detail::ExprNode;

  struct Parser {
    const std::string& s;
    std::size_t pos = 0;
    std::vector<ExprNode> nodes;

    explicit Parser(const std::string& s) : s(s) {}

    [[noreturn]] void fail(const std::string& msg) const {
      throw std::invalid_argument("expression error at position " + std::to_string(pos) + ": " +
                                  msg + " in \"" + s + "\"");
    }

    void skip_ws() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    bool consume(char c) {
      skip_ws();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    int make(ExprKind kind, int a = -1, int b = -1, double value = 0.0) {
      nodes.push_back({kind, value, a, b});
      return int(nodes.size()) - 1;
    }

    int parse_expr() {
      int lhs = parse_term();
      for (;;) {
        if (consume('+')) {
          lhs = make(ExprKind::add, lhs, parse_term());
        } else if (consume('-')) {
          lhs = make(ExprKind::sub, lhs, parse_term());
        } else {
          return lhs;
        }
      }
    }

    int parse_term() {
      int lhs = parse_unary();
      for (;;) {
        if (consume('*')) {
          lhs = make(ExprKind::mul, lhs, parse_unary());
        } else if (consume('/')) {
          lhs = make(ExprKind::div, lhs, parse_unary());
        } else {
          return lhs;
        }
      }
    }

    int parse_unary() {
      if (consume('-')) return make(ExprKind::neg, parse_unary());
      return parse_power();
    }

    int parse_power() {
      const int base = parse_primary();
      if (consume('^')) return make(ExprKind::pow, base, parse_unary());
      return base;
    }

    int parse_primary() {
      skip_ws();
      if (pos >= s.size()) fail("unexpected end of input");
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const char* begin = s.c_str() + pos;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("malformed number");
        pos += std::size_t(end - begin);
        return make(ExprKind::num, -1, -1, v);
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        const std::size_t start = pos;
        while (pos < s.size() && std::isalpha(static_cast<unsigned char>(s[pos]))) ++pos;
        const std::string name = s.substr(start, pos - start);
        if (name == "x") return make(ExprKind::var_x);
        if (name == "y") return make(ExprKind::var_y);
        if (name == "pi") return make(ExprKind::num, -1, -1, 3.14159265358979323846);
        ExprKind fn;
        if (name == "sin") {
          fn = ExprKind::sin;
        } else if (name == "cos") {
          fn = ExprKind::cos;
        } else if (name == "exp") {
          fn = ExprKind::exp;
        } else {
          pos = start;
          fail("unknown identifier \"" + name + "\"");
        }
        if (!consume('(')) fail("expected ( after " + name);
        const int arg = parse_expr();
        if (!consume(')')) fail("expected ) closing " + name);
        return make(fn, arg);
      }
      if (consume('(')) {
        const int inner = parse_expr();
        if (!consume(')')) fail("expected )");
        return inner;
      }
      fail(std::string("unexpected character '") + c + "'");
    }
  };

  Parser p(text);
  const int root = p.parse_expr();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing input");
  return Expr(std::move(p.nodes), root, text);
}

}  // namespace wopt
