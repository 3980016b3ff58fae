#include <cctype>
#include <charconv>
#include <cmath>
#include <string>

#include "probstl/errors.hpp"
#include "probstl/stl.hpp"
#include "probstl/util.hpp"

namespace probstl {

namespace {

// Hand-rolled recursive descent.  Precedence, loosest to tightest:
//   |   &   U[a,b]   unary (!, G, F, parentheses, predicate)
struct Parser {
  const std::string& text;
  int state_dim;
  double dt;  // 0 = interval bounds are step indices; else seconds
  size_t pos = 0;
  int line = 1, col = 1;

  Parser(const std::string& t, int n, double dt_ = 0.0) : text(t), state_dim(n), dt(dt_) {}

  [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, line, col); }

  void advance() {
    if (text[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) advance();
  }

  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }

  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }

  bool consume(char c) {
    if (peek() == c) {
      advance();
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!consume(c)) fail(std::string("expected '") + c + "'");
  }

  bool lookahead_word(char c) {
    // operator letters G/F/U must be followed by '[' to count as operators
    skip_ws();
    return pos + 1 < text.size() && text[pos] == c && text[pos + 1] == '[';
  }

  int parse_nonneg_int() {
    skip_ws();
    if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos])))
      fail("expected nonnegative integer interval bound");
    long v = 0;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      v = v * 10 + (text[pos] - '0');
      if (v > 1000000000L) fail("interval bound too large");
      advance();
    }
    return int(v);
  }

  double parse_nonneg_bound() {
    skip_ws();
    if (pos >= text.size() ||
        !(std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.'))
      fail("expected nonnegative interval bound");
    return parse_number();
  }

  std::pair<int, int> parse_interval() {
    expect('[');
    if (dt > 0.0) {
      // Second-valued bounds cover the requested window: lo rounds down, hi
      // rounds up, with a tolerance so grid-aligned bounds stay exact.
      double a = parse_nonneg_bound();
      expect(',');
      double b = parse_nonneg_bound();
      expect(']');
      if (a > b)
        fail("inverted interval [" + std::to_string(a) + "," + std::to_string(b) + "]");
      int t1 = int(std::floor(a / dt + 1e-9));
      int t2 = int(std::ceil(b / dt - 1e-9));
      if (t2 < t1) t2 = t1;
      return {t1, t2};
    }
    int t1 = parse_nonneg_int();
    expect(',');
    int t2 = parse_nonneg_int();
    expect(']');
    if (t1 > t2)
      fail("inverted interval [" + std::to_string(t1) + "," + std::to_string(t2) + "]");
    return {t1, t2};
  }

  double parse_number() {
    skip_ws();
    size_t start = pos;
    if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) advance();
    while (pos < text.size() && (std::isdigit(static_cast<unsigned char>(text[pos])) ||
                                 text[pos] == '.' || text[pos] == 'e' || text[pos] == 'E' ||
                                 ((text[pos] == '+' || text[pos] == '-') &&
                                  (text[pos - 1] == 'e' || text[pos - 1] == 'E'))))
      advance();
    double value = 0.0;
    auto res = std::from_chars(text.data() + start, text.data() + pos, value);
    if (res.ec != std::errc{} || res.ptr != text.data() + pos) fail("malformed number");
    return value;
  }

  int parse_var_index() {
    // 'x' already seen
    advance();
    skip_ws();
    if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos])))
      fail("expected variable index after 'x'");
    int idx = parse_nonneg_int();
    if (idx < 1 || idx > state_dim)
      fail("variable x" + std::to_string(idx) + " out of range for state dimension " +
           std::to_string(state_dim));
    return idx - 1;
  }

  // affine := ['+'|'-'] term (('+'|'-') term)* ;
  // term := '(' affine ')' | number ['*' var] | var
  void parse_affine(Eigen::VectorXd& a, double& b) {
    double sign = 1.0;
    skip_ws();
    if (peek() == '+' || peek() == '-') sign = consume('+') ? 1.0 : (consume('-'), -1.0);
    for (;;) {
      skip_ws();
      char c = peek();
      if (c == 'x') {
        a[parse_var_index()] += sign;
      } else if (c == '(') {
        advance();
        Eigen::VectorXd ta = Eigen::VectorXd::Zero(state_dim);
        double tb = 0.0;
        parse_affine(ta, tb);
        expect(')');
        a += sign * ta;
        b += sign * tb;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        double v = parse_number();
        if (consume('*')) {
          skip_ws();
          if (peek() != 'x') fail("expected variable after '*'");
          a[parse_var_index()] += sign * v;
        } else {
          b += sign * v;
        }
      } else {
        fail("expected term in affine expression");
      }
      skip_ws();
      if (peek() == '+') {
        consume('+');
        sign = 1.0;
      } else if (peek() == '-') {
        consume('-');
        sign = -1.0;
      } else {
        break;
      }
    }
  }

  StlFormula parse_predicate() {
    Eigen::VectorXd la = Eigen::VectorXd::Zero(state_dim), ra = Eigen::VectorXd::Zero(state_dim);
    double lb = 0.0, rb = 0.0;
    parse_affine(la, lb);
    skip_ws();
    char c1 = peek();
    if (c1 != '>' && c1 != '<') fail("expected comparison operator");
    advance();
    consume('=');  // strict and non-strict collapse
    parse_affine(ra, rb);
    if (c1 == '>') return StlFormula::predicate({la - ra, lb - rb});
    return StlFormula::predicate({ra - la, rb - lb});
  }

  StlFormula parse_unary() {
    skip_ws();
    char c = peek();
    if (c == '!') {
      advance();
      return StlFormula::negation(parse_unary());
    }
    if (lookahead_word('G')) {
      advance();
      auto [t1, t2] = parse_interval();
      return StlFormula::always(t1, t2, parse_unary());
    }
    if (lookahead_word('F')) {
      advance();
      auto [t1, t2] = parse_interval();
      return StlFormula::eventually(t1, t2, parse_unary());
    }
    if (c == '(') {
      advance();
      StlFormula f = parse_or();
      expect(')');
      return f;
    }
    return parse_predicate();
  }

  StlFormula parse_until() {
    StlFormula left = parse_unary();
    if (lookahead_word('U')) {
      advance();
      auto [t1, t2] = parse_interval();
      StlFormula right = parse_unary();
      return StlFormula::until(t1, t2, std::move(left), std::move(right));
    }
    return left;
  }

  StlFormula parse_and() {
    StlFormula f = parse_until();
    while (peek() == '&') {
      advance();
      f = StlFormula::conjunction(std::move(f), parse_until());
    }
    return f;
  }

  StlFormula parse_or() {
    StlFormula f = parse_and();
    while (peek() == '|') {
      advance();
      f = StlFormula::disjunction(std::move(f), parse_and());
    }
    return f;
  }

  StlFormula parse() {
    StlFormula f = parse_or();
    if (!at_end()) fail("unexpected trailing input");
    return f;
  }
};

void print_node(const StlFormula::Node& n, std::string& out) {
  using Kind = StlFormula::Kind;
  switch (n.kind) {
    case Kind::Predicate: {
      bool emitted = false;
      for (Eigen::Index i = 0; i < n.pred.a.size(); ++i) {
        double c = n.pred.a[i];
        if (c == 0.0) continue;
        if (emitted)
          out += c < 0 ? " - " : " + ";
        else if (c < 0)
          out += "-";
        out += format_double(std::abs(c));
        out += "*x";
        out += std::to_string(i + 1);
        emitted = true;
      }
      if (!emitted) {
        out += format_double(n.pred.b);
      } else if (n.pred.b != 0.0) {
        out += n.pred.b < 0 ? " - " : " + ";
        out += format_double(std::abs(n.pred.b));
      }
      out += " >= 0";
      break;
    }
    case Kind::Not:
      out += "!(";
      print_node(*n.left, out);
      out += ")";
      break;
    case Kind::And:
    case Kind::Or:
      out += "(";
      print_node(*n.left, out);
      out += n.kind == Kind::And ? " & " : " | ";
      print_node(*n.right, out);
      out += ")";
      break;
    case Kind::Always:
    case Kind::Eventually:
      out += n.kind == Kind::Always ? "G[" : "F[";
      out += std::to_string(n.t1);
      out += ",";
      out += std::to_string(n.t2);
      out += "](";
      print_node(*n.left, out);
      out += ")";
      break;
    case Kind::Until:
      out += "(";
      print_node(*n.left, out);
      out += " U[";
      out += std::to_string(n.t1);
      out += ",";
      out += std::to_string(n.t2);
      out += "] ";
      print_node(*n.right, out);
      out += ")";
      break;
  }
}

}  // namespace

StlFormula parse_formula(const std::string& text, int state_dim) {
  if (state_dim <= 0) throw ConfigError("state dimension must be positive");
  Parser p(text, state_dim);
  return p.parse();
}

StlFormula parse_formula(const std::string& text, int state_dim, double dt) {
  if (state_dim <= 0) throw ConfigError("state dimension must be positive");
  if (!(dt > 0.0)) throw ConfigError("time step must be positive to parse second-valued intervals");
  Parser p(text, state_dim, dt);
  return p.parse();
}

std::string pretty_print(const StlFormula& f) {
  std::string out;
  print_node(f.root(), out);
  return out;
}

}  // namespace probstl
