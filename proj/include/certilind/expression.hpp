#pragma once

// Small expression language shared by operator strings ("ad0^2*a1 - alpha^2*a1")
// and time-dependent coefficients ("cos(2*t)").
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | '+' unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | name '(' expr ')' | '(' expr ')'
//
// Names: a<j>, ad<j>, q<j>, p<j>, n<j>, id (operators); t (time); pi; i
// (imaginary unit); sin cos exp sqrt cosh sinh (functions); anything else
// is looked up in the parameter table.

#include <cctype>
#include <cstdio>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "certilind/errors.hpp"
#include "certilind/operators.hpp"

namespace certilind {

using ParamTable = std::map<std::string, double>;

namespace expr {

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  enum class Kind { Number, Name, Neg, Add, Sub, Mul, Div, Pow, Call } kind;
  cd value{};
  std::string name;
  NodePtr lhs, rhs;
  std::size_t pos = 0;
};

struct Token {
  enum class Kind { Number, Name, Op, End } kind;
  std::string text;
  double number = 0.0;
  std::size_t pos = 0;
};

inline std::vector<Token> tokenize(const std::string& src) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t used = 0;
      double v = std::stod(src.substr(i), &used);
      out.push_back({Token::Kind::Number, src.substr(i, used), v, i});
      i += used;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      out.push_back({Token::Kind::Name, src.substr(i, j - i), 0.0, i});
      i = j;
      continue;
    }
    if (std::string("+-*/^()").find(c) != std::string::npos) {
      out.push_back({Token::Kind::Op, std::string(1, c), 0.0, i});
      ++i;
      continue;
    }
    throw ModelError("unexpected character '" + std::string(1, c) + "' at position " + std::to_string(i) + " in \"" + src + "\"");
  }
  out.push_back({Token::Kind::End, "", 0.0, src.size()});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string src) : src_(std::move(src)), toks_(tokenize(src_)) {}

  NodePtr parse() {
    auto n = parse_expr();
    if (peek().kind != Token::Kind::End) fail(peek());
    return n;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }
  bool accept_op(const char* op) {
    if (peek().kind == Token::Kind::Op && peek().text == op) {
      ++pos_;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const Token& t) const {
    std::string what = t.kind == Token::Kind::End ? "end of input" : "token '" + t.text + "'";
    throw ModelError("unexpected " + what + " at position " + std::to_string(t.pos) + " in \"" + src_ + "\"");
  }
  static NodePtr make(Node::Kind k, NodePtr l, NodePtr r, std::size_t pos) {
    auto n = std::make_shared<Node>();
    n->kind = k;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    n->pos = pos;
    return n;
  }

  NodePtr parse_expr() {
    auto lhs = parse_term();
    while (true) {
      auto pos = peek().pos;
      if (accept_op("+")) lhs = make(Node::Kind::Add, lhs, parse_term(), pos);
      else if (accept_op("-")) lhs = make(Node::Kind::Sub, lhs, parse_term(), pos);
      else return lhs;
    }
  }
  NodePtr parse_term() {
    auto lhs = parse_unary();
    while (true) {
      auto pos = peek().pos;
      if (accept_op("*")) lhs = make(Node::Kind::Mul, lhs, parse_unary(), pos);
      else if (accept_op("/")) lhs = make(Node::Kind::Div, lhs, parse_unary(), pos);
      else return lhs;
    }
  }
  NodePtr parse_unary() {
    auto pos = peek().pos;
    if (accept_op("-")) return make(Node::Kind::Neg, parse_unary(), nullptr, pos);
    if (accept_op("+")) return parse_unary();
    return parse_power();
  }
  NodePtr parse_power() {
    auto base = parse_primary();
    auto pos = peek().pos;
    if (accept_op("^")) return make(Node::Kind::Pow, base, parse_unary(), pos);
    return base;
  }
  NodePtr parse_primary() {
    const Token& t = next();
    if (t.kind == Token::Kind::Number) {
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::Number;
      n->value = t.number;
      n->pos = t.pos;
      return n;
    }
    if (t.kind == Token::Kind::Name) {
      if (accept_op("(")) {
        auto arg = parse_expr();
        if (!accept_op(")")) fail(peek());
        auto n = make(Node::Kind::Call, arg, nullptr, t.pos);
        std::const_pointer_cast<Node>(n)->name = t.text;
        return n;
      }
      auto n = std::make_shared<Node>();
      n->kind = Node::Kind::Name;
      n->name = t.text;
      n->pos = t.pos;
      return n;
    }
    if (t.kind == Token::Kind::Op && t.text == "(") {
      auto inner = parse_expr();
      if (!accept_op(")")) fail(peek());
      return inner;
    }
    fail(t);
  }

  std::string src_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

inline const std::set<std::string>& function_names() {
  static const std::set<std::string> f{"sin", "cos", "exp", "sqrt", "cosh", "sinh"};
  return f;
}

inline cd apply_function(const std::string& f, cd x) {
  if (f == "sin") return std::sin(x);
  if (f == "cos") return std::cos(x);
  if (f == "exp") return std::exp(x);
  if (f == "sqrt") return std::sqrt(x);
  if (f == "cosh") return std::cosh(x);
  if (f == "sinh") return std::sinh(x);
  throw ModelError("unknown function '" + f + "'");
}

/// Small integer exponents by repeated multiplication, so that alpha^2 is exact.
inline cd scalar_pow(cd b, cd e) {
  if (e.imag() == 0.0 && std::floor(e.real()) == e.real() && std::abs(e.real()) < 64) {
    int k = static_cast<int>(e.real());
    cd r = 1.0;
    for (int j = 0; j < std::abs(k); ++j) r *= b;
    return k < 0 ? 1.0 / r : r;
  }
  return std::pow(b, e);
}

/// Operator letters a<j>, ad<j>, q<j>, p<j>, n<j>; returns (kind, mode).
inline std::optional<std::pair<std::string, int>> operator_name(const std::string& name) {
  static const std::regex re("^(ad|a|q|p|n)([0-9]+)$");
  std::smatch m;
  if (!std::regex_match(name, m, re)) return std::nullopt;
  return std::make_pair(m[1].str(), std::stoi(m[2].str()));
}

inline bool is_reserved_name(const std::string& name) {
  return operator_name(name) || name == "id" || name == "t" || name == "pi" || name == "i" || function_names().count(name);
}

// Evaluates to an operator polynomial.  Scalars are identity multiples.
class PolyEvaluator {
 public:
  PolyEvaluator(int modes, const ParamTable& params, std::string src) : modes_(modes), params_(params), src_(std::move(src)) {}

  PolyOperator eval(const NodePtr& n) const {
    switch (n->kind) {
      case Node::Kind::Number: return PolyOperator::scalar(modes_, n->value);
      case Node::Kind::Name: return name(n);
      case Node::Kind::Neg: return -eval(n->lhs);
      case Node::Kind::Add: return eval(n->lhs) + eval(n->rhs);
      case Node::Kind::Sub: return eval(n->lhs) - eval(n->rhs);
      case Node::Kind::Mul: return eval(n->lhs) * eval(n->rhs);
      case Node::Kind::Div: {
        auto d = eval(n->rhs);
        if (!d.is_scalar() || d.scalar_value() == cd(0.0)) bad(n, "division by a non-scalar or zero");
        return eval(n->lhs) * (1.0 / d.scalar_value());
      }
      case Node::Kind::Pow: {
        auto b = eval(n->lhs);
        auto e = eval(n->rhs);
        if (!e.is_scalar()) bad(n, "exponent must be a scalar");
        cd ev = e.scalar_value();
        if (b.is_scalar()) return PolyOperator::scalar(modes_, scalar_pow(b.scalar_value(), ev));
        if (ev.imag() != 0.0 || ev.real() < 0 || std::floor(ev.real()) != ev.real()) bad(n, "operator powers must be non-negative integers");
        return b.pow(static_cast<int>(ev.real()));
      }
      case Node::Kind::Call: {
        auto a = eval(n->lhs);
        if (!a.is_scalar()) bad(n, "function '" + n->name + "' needs a scalar argument");
        if (!function_names().count(n->name)) bad(n, "unknown function '" + n->name + "'");
        return PolyOperator::scalar(modes_, apply_function(n->name, a.scalar_value()));
      }
    }
    bad(n, "bad node");
  }

 private:
  PolyOperator name(const NodePtr& n) const {
    const auto& s = n->name;
    if (auto op = operator_name(s)) {
      int mode = op->second;
      if (mode >= modes_) bad(n, "token '" + s + "' refers to mode " + std::to_string(mode) + " but the model has " + std::to_string(modes_));
      if (op->first == "a") return PolyOperator::annihilation(modes_, mode);
      if (op->first == "ad") return PolyOperator::creation(modes_, mode);
      if (op->first == "q") return PolyOperator::position(modes_, mode);
      if (op->first == "p") return PolyOperator::momentum(modes_, mode);
      return PolyOperator::number(modes_, mode);
    }
    if (s == "id") return PolyOperator::identity(modes_);
    if (s == "pi") return PolyOperator::scalar(modes_, M_PI);
    if (s == "i") return PolyOperator::scalar(modes_, cd(0.0, 1.0));
    if (s == "t") bad(n, "token 't' is not allowed in an operator expression");
    auto it = params_.find(s);
    if (it == params_.end()) bad(n, "unknown token '" + s + "'");
    return PolyOperator::scalar(modes_, it->second);
  }
  [[noreturn]] void bad(const NodePtr& n, const std::string& msg) const {
    throw ModelError(msg + " at position " + std::to_string(n->pos) + " in \"" + src_ + "\"");
  }

  int modes_;
  const ParamTable& params_;
  std::string src_;
};

// Evaluates to a complex number at time t.
class ScalarEvaluator {
 public:
  ScalarEvaluator(ParamTable params, std::string src) : params_(std::move(params)), src_(std::move(src)) {}

  cd eval(const NodePtr& n, double t) const {
    switch (n->kind) {
      case Node::Kind::Number: return n->value;
      case Node::Kind::Name: return name(n, t);
      case Node::Kind::Neg: return -eval(n->lhs, t);
      case Node::Kind::Add: return eval(n->lhs, t) + eval(n->rhs, t);
      case Node::Kind::Sub: return eval(n->lhs, t) - eval(n->rhs, t);
      case Node::Kind::Mul: return eval(n->lhs, t) * eval(n->rhs, t);
      case Node::Kind::Div: return eval(n->lhs, t) / eval(n->rhs, t);
      case Node::Kind::Pow: {
        return scalar_pow(eval(n->lhs, t), eval(n->rhs, t));
      }
      case Node::Kind::Call:
        if (!function_names().count(n->name)) bad(n, "unknown function '" + n->name + "'");
        return apply_function(n->name, eval(n->lhs, t));
    }
    bad(n, "bad node");
  }

  /// Static validation: every name resolves.
  void check(const NodePtr& n) const {
    if (!n) return;
    if (n->kind == Node::Kind::Name) name(n, 0.0);
    if (n->kind == Node::Kind::Call && !function_names().count(n->name)) bad(n, "unknown function '" + n->name + "'");
    check(n->lhs);
    check(n->rhs);
  }

  static bool depends_on_time(const NodePtr& n) {
    if (!n) return false;
    if (n->kind == Node::Kind::Name && n->name == "t") return true;
    return depends_on_time(n->lhs) || depends_on_time(n->rhs);
  }

 private:
  cd name(const NodePtr& n, double t) const {
    const auto& s = n->name;
    if (s == "t") return t;
    if (s == "pi") return M_PI;
    if (s == "i") return cd(0.0, 1.0);
    if (operator_name(s) || s == "id") bad(n, "operator token '" + s + "' is not allowed in a coefficient");
    auto it = params_.find(s);
    if (it == params_.end()) bad(n, "unknown token '" + s + "'");
    return it->second;
  }
  [[noreturn]] void bad(const NodePtr& n, const std::string& msg) const {
    throw ModelError(msg + " at position " + std::to_string(n->pos) + " in \"" + src_ + "\"");
  }

  ParamTable params_;
  std::string src_;
};

}  // namespace expr

inline PolyOperator parse_poly(const std::string& src, int modes, const ParamTable& params = {}) {
  expr::Parser p(src);
  return expr::PolyEvaluator(modes, params, src).eval(p.parse());
}

/// Compiled scalar function of t.
struct ScalarExpr {
  std::string source;
  bool time_dependent = false;
  std::function<cd(double)> fn;
};

inline ScalarExpr parse_scalar(const std::string& src, const ParamTable& params = {}) {
  expr::Parser p(src);
  auto ast = p.parse();
  auto ev = std::make_shared<expr::ScalarEvaluator>(params, src);
  ev->check(ast);
  ScalarExpr out;
  out.source = src;
  out.time_dependent = expr::ScalarEvaluator::depends_on_time(ast);
  out.fn = [ev, ast](double t) { return ev->eval(ast, t); };
  return out;
}

/// Text form accepted by parse_poly; doubles survive the round trip.
inline std::string format_poly(const PolyOperator& op) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string out;
  for (const auto& term : op.terms()) {
    std::string c;
    if (term.coef.imag() == 0.0) c = "(" + num(term.coef.real()) + ")";
    else c = "(" + num(term.coef.real()) + "+(" + num(term.coef.imag()) + ")*i)";
    std::string s = c;
    if (term.word.empty()) s += "*id";
    for (const auto& l : term.word) s += std::string("*") + (l.dagger ? "ad" : "a") + std::to_string(l.mode);
    out += out.empty() ? s : " + " + s;
  }
  return out.empty() ? "0" : out;
}

}  // namespace certilind
