#include "affext/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "affext/errors.hpp"
#include "parser.hpp"

namespace affext {

// ---------------------------------------------------------------------------
// SymbolTable

SymbolTable& SymbolTable::add_family(std::string prefix, std::size_t count) {
  families_.push_back({std::move(prefix), count, size_});
  size_ += count;
  return *this;
}

SymbolTable& SymbolTable::add_name(std::string name) {
  plains_.push_back({std::move(name), size_});
  ++size_;
  return *this;
}

SymbolTable SymbolTable::state(std::size_t n) {
  SymbolTable t;
  t.add_family("x", n);
  return t;
}

SymbolTable SymbolTable::state_control(std::size_t n, std::size_t m) {
  SymbolTable t;
  t.add_family("x", n).add_family("u", m);
  return t;
}

SymbolTable SymbolTable::single(std::string name) {
  SymbolTable t;
  t.add_name(std::move(name));
  return t;
}

SymbolTable::Result SymbolTable::find(std::string_view name) const {
  for (const auto& p : plains_) {
    if (p.name == name) return {Lookup::Found, p.slot};
  }
  for (const auto& f : families_) {
    if (name.size() <= f.prefix.size() || name.substr(0, f.prefix.size()) != f.prefix) continue;
    const auto digits = name.substr(f.prefix.size());
    if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      continue;
    }
    std::size_t index = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (ec != std::errc{} || index == 0 || index > f.count) return {Lookup::OutOfRange, 0};
    return {Lookup::Found, f.offset + index - 1};
  }
  return {Lookup::Unknown, 0};
}

std::string SymbolTable::name(std::size_t slot) const {
  for (const auto& p : plains_) {
    if (p.slot == slot) return p.name;
  }
  for (const auto& f : families_) {
    if (slot >= f.offset && slot < f.offset + f.count) {
      return f.prefix + std::to_string(slot - f.offset + 1);
    }
  }
  return "v" + std::to_string(slot);
}

// ---------------------------------------------------------------------------
// Nodes and smart constructors with constant folding

namespace {
constexpr std::size_t kSizeCap = std::numeric_limits<std::size_t>::max() / 4;
}

struct ExprNode {
  Op op = Op::Constant;
  double value = 0.0;
  std::size_t slot = 0;
  std::vector<Expr> kids;
  std::size_t size = 1;
  bool has_abs = false;
  std::size_t slot_bound = 0;
};

namespace {

const std::shared_ptr<const ExprNode>& zero_node() {
  static const auto node = std::make_shared<const ExprNode>();
  return node;
}

std::size_t saturating_add(std::size_t a, std::size_t b) {
  return (a > kSizeCap || b > kSizeCap) ? kSizeCap : std::min(a + b, kSizeCap);
}

}  // namespace

Expr::Expr() : node_(zero_node()) {}

Expr::Expr(double value) {
  if (value == 0.0) {
    node_ = zero_node();
    return;
  }
  auto n = std::make_shared<ExprNode>();
  n->op = Op::Constant;
  n->value = value;
  node_ = std::move(n);
}

Expr::Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}

Expr Expr::variable(std::size_t slot) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::Variable;
  n->slot = slot;
  n->slot_bound = slot + 1;
  return Expr(std::shared_ptr<const ExprNode>(std::move(n)));
}

Op Expr::op() const noexcept { return node_->op; }
double Expr::value() const noexcept { return node_->value; }
std::size_t Expr::slot() const noexcept { return node_->slot; }
const Expr& Expr::lhs() const { return node_->kids.at(0); }
const Expr& Expr::rhs() const { return node_->kids.at(1); }
std::size_t Expr::size() const noexcept { return node_->size; }
bool Expr::uses_abs() const noexcept { return node_->has_abs; }
std::size_t Expr::slot_bound() const noexcept { return node_->slot_bound; }

struct ExprFactory {
  static Expr wrap(std::shared_ptr<const ExprNode> node) { return Expr(std::move(node)); }
};

namespace {

Expr make_node(Op op, const Expr& a, const Expr& b, double value, bool binary) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->value = value;
  n->kids.push_back(a);
  n->size = saturating_add(1, a.size());
  n->has_abs = op == Op::Abs || a.uses_abs();
  n->slot_bound = a.slot_bound();
  if (binary) {
    n->kids.push_back(b);
    n->size = saturating_add(n->size, b.size());
    n->has_abs = n->has_abs || b.uses_abs();
    n->slot_bound = std::max(n->slot_bound, b.slot_bound());
  }
  return ExprFactory::wrap(std::move(n));
}

}  // namespace

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.value() + b.value());
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  // keep constants on the left for printing and folding
  if (b.is_constant()) return make_node(Op::Add, b, a, 0.0, true);
  return make_node(Op::Add, a, b, 0.0, true);
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr(a.value() * b.value());
  if (a.is_zero() || b.is_zero()) return Expr();
  if (a.is_constant() && a.value() == 1.0) return b;
  if (b.is_constant() && b.value() == 1.0) return a;
  if (b.is_constant()) return b * a;
  if (a.is_constant() && b.op() == Op::Mul && b.lhs().is_constant()) {
    return Expr(a.value() * b.lhs().value()) * b.rhs();
  }
  return make_node(Op::Mul, a, b, 0.0, true);
}

Expr operator-(const Expr& a) { return Expr(-1.0) * a; }
Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

Expr operator/(const Expr& a, const Expr& b) {
  if (b.is_constant()) {
    if (b.value() == 0.0) throw InvalidArgument("division by constant zero");
    return a * Expr(1.0 / b.value());
  }
  return a * pow(b, -1.0);
}

Expr pow(const Expr& base, double exponent) {
  if (exponent == 0.0) return Expr(1.0);
  if (exponent == 1.0) return base;
  if (base.is_constant()) return Expr(std::pow(base.value(), exponent));
  if (base.op() == Op::Pow) return pow(base.lhs(), base.value() * exponent);
  return make_node(Op::Pow, base, Expr(), exponent, false);
}

namespace {

Expr make_unary(Op op, const Expr& a) {
  if (a.is_constant()) {
    switch (op) {
      case Op::Sin: return Expr(std::sin(a.value()));
      case Op::Cos: return Expr(std::cos(a.value()));
      case Op::Exp: return Expr(std::exp(a.value()));
      case Op::Abs: return Expr(std::abs(a.value()));
      default: break;
    }
  }
  return make_node(op, a, Expr(), 0.0, false);
}

}  // namespace

Expr sin(const Expr& a) { return make_unary(Op::Sin, a); }
Expr cos(const Expr& a) { return make_unary(Op::Cos, a); }
Expr exp(const Expr& a) { return make_unary(Op::Exp, a); }
Expr abs(const Expr& a) { return make_unary(Op::Abs, a); }

// ---------------------------------------------------------------------------
// Evaluation and differentiation

double Expr::evaluate(std::span<const double> vars) const {
  switch (op()) {
    case Op::Constant: return value();
    case Op::Variable:
      if (slot() >= vars.size()) throw InvalidArgument("variable slot outside evaluation vector");
      return vars[slot()];
    case Op::Add: return lhs().evaluate(vars) + rhs().evaluate(vars);
    case Op::Mul: return lhs().evaluate(vars) * rhs().evaluate(vars);
    case Op::Pow: return std::pow(lhs().evaluate(vars), value());
    case Op::Sin: return std::sin(lhs().evaluate(vars));
    case Op::Cos: return std::cos(lhs().evaluate(vars));
    case Op::Exp: return std::exp(lhs().evaluate(vars));
    case Op::Abs: return std::abs(lhs().evaluate(vars));
  }
  return 0.0;
}

Expr Expr::derivative(std::size_t s) const {
  switch (op()) {
    case Op::Constant: return Expr();
    case Op::Variable: return Expr(slot() == s ? 1.0 : 0.0);
    case Op::Add: return lhs().derivative(s) + rhs().derivative(s);
    case Op::Mul: return lhs().derivative(s) * rhs() + lhs() * rhs().derivative(s);
    case Op::Pow: {
      Expr inner = lhs().derivative(s);
      if (inner.is_zero()) return Expr();
      return Expr(value()) * pow(lhs(), value() - 1.0) * inner;
    }
    case Op::Sin: return cos(lhs()) * lhs().derivative(s);
    case Op::Cos: return -(sin(lhs()) * lhs().derivative(s));
    case Op::Exp: return (*this) * lhs().derivative(s);
    case Op::Abs: {
      if (lhs().derivative(s).is_zero()) return Expr();
      throw NonSmoothError("abs() is not differentiable; expression is evaluation-only");
    }
  }
  return Expr();
}

// ---------------------------------------------------------------------------
// Printing

namespace {

int precedence(Op op) {
  switch (op) {
    case Op::Add: return 1;
    case Op::Mul: return 2;
    case Op::Pow: return 3;
    default: return 4;
  }
}

std::string format_number(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  std::string s(buf, ptr);
  if (v < 0) return "(" + s + ")";
  return s;
}

void print(const Expr& e, const SymbolTable& sym, std::string& out, int parent) {
  const int prec = precedence(e.op());
  const bool paren = prec < parent;
  if (paren) out += '(';
  switch (e.op()) {
    case Op::Constant: out += format_number(e.value()); break;
    case Op::Variable: out += sym.name(e.slot()); break;
    case Op::Add:
      print(e.lhs(), sym, out, 1);
      out += " + ";
      print(e.rhs(), sym, out, 2);
      break;
    case Op::Mul:
      print(e.lhs(), sym, out, 2);
      out += '*';
      print(e.rhs(), sym, out, 3);
      break;
    case Op::Pow:
      print(e.lhs(), sym, out, 4);
      out += '^';
      out += format_number(e.value());
      break;
    case Op::Sin: out += "sin("; print(e.lhs(), sym, out, 0); out += ')'; break;
    case Op::Cos: out += "cos("; print(e.lhs(), sym, out, 0); out += ')'; break;
    case Op::Exp: out += "exp("; print(e.lhs(), sym, out, 0); out += ')'; break;
    case Op::Abs: out += "abs("; print(e.lhs(), sym, out, 0); out += ')'; break;
  }
  if (paren) out += ')';
}

}  // namespace

std::string Expr::to_string(const SymbolTable& symbols) const {
  std::string out;
  print(*this, symbols, out, 0);
  return out;
}

// ---------------------------------------------------------------------------
// Compiled form

namespace {

template <class Emit>
std::size_t emit_postfix(const Expr& e, Emit&& emit) {
  switch (e.op()) {
    case Op::Constant:
    case Op::Variable:
      emit(e);
      return 1;
    case Op::Add:
    case Op::Mul: {
      const std::size_t da = emit_postfix(e.lhs(), emit);
      const std::size_t db = emit_postfix(e.rhs(), emit);
      emit(e);
      return std::max(da, db + 1);
    }
    default: {
      const std::size_t d = emit_postfix(e.lhs(), emit);
      emit(e);
      return d;
    }
  }
}

}  // namespace

CompiledExpr::CompiledExpr(const Expr& expr) {
  depth_ = emit_postfix(expr, [this](const Expr& node) {
    int ipow = 0;
    if (node.op() == Op::Pow && node.value() == std::round(node.value()) && std::abs(node.value()) <= 8.0) {
      ipow = static_cast<int>(node.value());
    }
    code_.push_back({node.op(), node.value(), node.slot(), ipow});
  });
}

double CompiledExpr::operator()(std::span<const double> vars) const {
  if (code_.empty()) return 0.0;
  constexpr std::size_t kInline = 32;
  double inline_stack[kInline];
  std::vector<double> heap;
  double* stack = inline_stack;
  if (depth_ > kInline) {
    heap.resize(depth_);
    stack = heap.data();
  }
  std::size_t top = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Constant: stack[top++] = in.value; break;
      case Op::Variable: stack[top++] = vars[in.slot]; break;
      case Op::Add: --top; stack[top - 1] += stack[top]; break;
      case Op::Mul: --top; stack[top - 1] *= stack[top]; break;
      case Op::Pow:
        if (in.ipow > 0) {
          const double b = stack[top - 1];
          double r = b;
          for (int i = 1; i < in.ipow; ++i) r *= b;
          stack[top - 1] = r;
        } else {
          stack[top - 1] = std::pow(stack[top - 1], in.value);
        }
        break;
      case Op::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
      case Op::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
      case Op::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
      case Op::Abs: stack[top - 1] = std::abs(stack[top - 1]); break;
    }
  }
  return stack[0];
}

// ---------------------------------------------------------------------------
// Parsing entry points

Expr parse_expression(std::string_view text, const SymbolTable& symbols, ParseOptions options) {
  detail::Parser p(text, symbols, options);
  p.skip_separators();
  Expr e = p.expression();
  p.skip_separators();
  if (!p.at_end()) {
    p.fail(ParseError::Kind::Syntax, p.peek().pos,
           "unexpected trailing input '" + std::string(p.peek().text) + "'");
  }
  return e;
}

std::vector<Expr> parse_expression_list(std::string_view text, const SymbolTable& symbols,
                                        ParseOptions options) {
  detail::Parser p(text, symbols, options);
  std::vector<Expr> out;
  p.skip_separators();
  if (p.at_end()) return out;
  out.push_back(p.expression());
  while (p.accept(detail::Tok::Comma)) out.push_back(p.expression());
  p.skip_separators();
  if (!p.at_end()) {
    p.fail(ParseError::Kind::Syntax, p.peek().pos,
           "unexpected trailing input '" + std::string(p.peek().text) + "'");
  }
  return out;
}

double parse_constant(std::string_view text) {
  const SymbolTable none;
  const Expr e = parse_expression(text, none);
  if (!e.is_constant()) throw ParseError(ParseError::Kind::Syntax, 0, "expected a constant");
  return e.value();
}

}  // namespace affext
