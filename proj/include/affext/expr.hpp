#pragma once

// Symbolic scalar expressions over a fixed set of real variables.
//
// Only operations that stay closed under differentiation are admitted
// (sums, products, constant powers, sin, cos, exp). The extended grammar
// additionally accepts abs(); such expressions evaluate normally but refuse
// to be differentiated.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace affext {

/// Maps variable names to slots in the evaluation vector.
///
/// Names come in indexed families (`x1..xn` -> offset..offset+n-1) and plain
/// names (`r`, `s`). Lookups distinguish an unknown name from an indexed name
/// whose index is outside its family.
class SymbolTable {
public:
  enum class Lookup { Found, Unknown, OutOfRange };

  struct Result {
    Lookup status = Lookup::Unknown;
    std::size_t slot = 0;
  };

  SymbolTable& add_family(std::string prefix, std::size_t count);
  SymbolTable& add_name(std::string name);

  /// `x1..xn`.
  static SymbolTable state(std::size_t n);
  /// `x1..xn` followed by `u1..um`.
  static SymbolTable state_control(std::size_t n, std::size_t m);
  /// A single plain variable, e.g. `r` or `s`.
  static SymbolTable single(std::string name);

  Result find(std::string_view name) const;
  std::string name(std::size_t slot) const;
  std::size_t size() const noexcept { return size_; }

private:
  struct Family {
    std::string prefix;
    std::size_t count;
    std::size_t offset;
  };
  struct Plain {
    std::string name;
    std::size_t slot;
  };
  std::vector<Family> families_;
  std::vector<Plain> plains_;
  std::size_t size_ = 0;
};

enum class Op : std::uint8_t { Constant, Variable, Add, Mul, Pow, Sin, Cos, Exp, Abs };

struct ExprNode;

/// Immutable expression tree with shared subtrees.
class Expr {
public:
  Expr();  // constant 0
  Expr(double value);  // NOLINT(google-explicit-constructor)

  static Expr variable(std::size_t slot);

  Op op() const noexcept;
  /// Constant value (Constant) or exponent (Pow).
  double value() const noexcept;
  /// Variable slot (Variable).
  std::size_t slot() const noexcept;
  /// Children; `rhs` is only meaningful for Add and Mul.
  const Expr& lhs() const;
  const Expr& rhs() const;

  bool is_constant() const noexcept { return op() == Op::Constant; }
  bool is_zero() const noexcept { return is_constant() && value() == 0.0; }

  /// Tree size counting shared subtrees once per occurrence, saturating.
  std::size_t size() const noexcept;
  bool uses_abs() const noexcept;
  /// One past the largest referenced slot (0 for a constant expression).
  std::size_t slot_bound() const noexcept;

  double evaluate(std::span<const double> vars) const;
  Expr derivative(std::size_t slot) const;

  std::string to_string(const SymbolTable& symbols) const;

private:
  explicit Expr(std::shared_ptr<const ExprNode> node);
  std::shared_ptr<const ExprNode> node_;

  friend struct ExprFactory;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr pow(const Expr& base, double exponent);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr exp(const Expr& a);
Expr abs(const Expr& a);

/// Flat postfix form of an expression for repeated evaluation.
class CompiledExpr {
public:
  CompiledExpr() = default;
  explicit CompiledExpr(const Expr& expr);

  double operator()(std::span<const double> vars) const;
  bool is_constant() const noexcept { return code_.size() == 1 && code_[0].op == Op::Constant; }

private:
  struct Instr {
    Op op;
    double value;
    std::size_t slot;
    int ipow;  // small integer exponent of a Pow node, 0 otherwise
  };
  std::vector<Instr> code_;
  std::size_t depth_ = 0;
};

struct ParseOptions {
  bool allow_abs = false;
};

/// Parse a scalar expression. Throws ParseError.
Expr parse_expression(std::string_view text, const SymbolTable& symbols,
                      ParseOptions options = {});

/// Parse a comma-separated list of scalar expressions.
std::vector<Expr> parse_expression_list(std::string_view text, const SymbolTable& symbols,
                                        ParseOptions options = {});

/// Parse an expression with no free variables and return its value.
double parse_constant(std::string_view text);

}  // namespace affext
