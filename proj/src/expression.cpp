#include "shps/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

#include "shps/error.hpp"

namespace shps {

struct Expression::Node {
  enum class Kind { Number, Var, Neg, Add, Sub, Mul, Div, Pow, Call1, Call2 } kind;
  double value = 0.0;
  int var = 0;
  double (*fn1)(double) = nullptr;
  double (*fn2)(double, double) = nullptr;
  std::shared_ptr<const Node> lhs, rhs;

  double eval(const Vec3& x) const {
    switch (kind) {
      case Kind::Number: return value;
      case Kind::Var: return x(var);
      case Kind::Neg: return -lhs->eval(x);
      case Kind::Add: return lhs->eval(x) + rhs->eval(x);
      case Kind::Sub: return lhs->eval(x) - rhs->eval(x);
      case Kind::Mul: return lhs->eval(x) * rhs->eval(x);
      case Kind::Div: return lhs->eval(x) / rhs->eval(x);
      case Kind::Pow: return std::pow(lhs->eval(x), rhs->eval(x));
      case Kind::Call1: return fn1(lhs->eval(x));
      case Kind::Call2: return fn2(lhs->eval(x), rhs->eval(x));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

struct Fn1 {
  const char* name;
  double (*fn)(double);
};
struct Fn2 {
  const char* name;
  double (*fn)(double, double);
};

const Fn1 kFn1[] = {{"sin", [](double a) { return std::sin(a); }},   {"cos", [](double a) { return std::cos(a); }},
                    {"tan", [](double a) { return std::tan(a); }},   {"exp", [](double a) { return std::exp(a); }},
                    {"log", [](double a) { return std::log(a); }},   {"sqrt", [](double a) { return std::sqrt(a); }},
                    {"abs", [](double a) { return std::abs(a); }},   {"tanh", [](double a) { return std::tanh(a); }},
                    {"atan", [](double a) { return std::atan(a); }}};
const Fn2 kFn2[] = {{"atan2", [](double a, double b) { return std::atan2(a, b); }},
                    {"pow", [](double a, double b) { return std::pow(a, b); }},
                    {"min", [](double a, double b) { return std::fmin(a, b); }},
                    {"max", [](double a, double b) { return std::fmax(a, b); }}};

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr n = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw InvalidArgument("expression '" + s_ + "': " + what + " at column " + std::to_string(pos_ + 1));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  static NodePtr make(Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Expression::Node>();
    n->kind = k;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
  }

  NodePtr sum() {
    NodePtr n = product();
    for (;;) {
      if (eat('+')) n = make(Kind::Add, n, product());
      else if (eat('-')) n = make(Kind::Sub, n, product());
      else return n;
    }
  }
  NodePtr product() {
    NodePtr n = unary();
    for (;;) {
      if (eat('*')) n = make(Kind::Mul, n, unary());
      else if (eat('/')) n = make(Kind::Div, n, unary());
      else return n;
    }
  }
  NodePtr unary() {
    if (eat('-')) return make(Kind::Neg, unary());
    if (eat('+')) return unary();
    return power();
  }
  NodePtr power() {
    NodePtr base = primary();
    if (eat('^')) return make(Kind::Pow, base, unary());
    return base;
  }
  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr n = sum();
      if (!eat(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    fail("unexpected '" + std::string(1, c) + "'");
  }
  NodePtr number() {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc()) fail("bad number");
    pos_ = static_cast<std::size_t>(end - s_.data());
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::Number;
    n->value = v;
    return n;
  }
  NodePtr name() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    const std::string id = s_.substr(start, pos_ - start);
    auto n = std::make_shared<Expression::Node>();
    if (id == "x" || id == "y" || id == "z") {
      n->kind = Kind::Var;
      n->var = id[0] - 'x';
      return n;
    }
    if (id == "pi" || id == "e") {
      n->kind = Kind::Number;
      n->value = id == "pi" ? std::numbers::pi : std::numbers::e;
      return n;
    }
    for (const auto& f : kFn1)
      if (id == f.name) {
        if (!eat('(')) fail("expected '(' after " + id);
        NodePtr a = sum();
        if (!eat(')')) fail("expected ')'");
        auto call = std::make_shared<Expression::Node>();
        call->kind = Kind::Call1;
        call->fn1 = f.fn;
        call->lhs = a;
        return call;
      }
    for (const auto& f : kFn2)
      if (id == f.name) {
        if (!eat('(')) fail("expected '(' after " + id);
        NodePtr a = sum();
        if (!eat(',')) fail("expected ','");
        NodePtr b = sum();
        if (!eat(')')) fail("expected ')'");
        auto call = std::make_shared<Expression::Node>();
        call->kind = Kind::Call2;
        call->fn2 = f.fn;
        call->lhs = a;
        call->rhs = b;
        return call;
      }
    pos_ = start;
    fail("unknown name '" + id + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(const std::string& text) {
  Expression e;
  e.text_ = text;
  e.root_ = Parser(text).parse();
  return e;
}

double Expression::operator()(const Vec3& x) const { return root_->eval(x); }

}  // namespace shps
