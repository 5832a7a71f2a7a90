#pragma once

// Vector fields X_1..X_m on R^n, given symbolically so that Jacobians and
// iterated Lie brackets are exact.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "affext/expr.hpp"
#include "affext/linalg.hpp"

namespace affext {

/// One vector field: n component expressions over x1..xn.
using Field = std::vector<Expr>;

inline constexpr std::size_t kDefaultNodeCap = 100000;

class FieldSet {
public:
  FieldSet(std::size_t dim, std::vector<Field> fields,
           std::optional<bool> declared_bounded = std::nullopt);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return fields_.size(); }
  const Field& field(std::size_t i) const;
  const std::vector<Field>& fields() const noexcept { return fields_; }
  std::optional<bool> declared_bounded() const noexcept { return declared_bounded_; }

  /// X_i(x). Throws NonFiniteError.
  Vector eval(std::size_t i, const VectorRef& x) const;
  /// dX_i(x), row j = gradient of component j.
  Matrix jacobian(std::size_t i, const VectorRef& x) const;
  /// B(x) = (X_1(x), ..., X_m(x)) as an n x m matrix.
  Matrix frame(const VectorRef& x) const;

  // Allocation-free kernels used by the integrators. No finiteness checks.
  void velocity(const double* x, const double* u, double* out) const;
  void frame_into(const double* x, double* out_colmajor) const;
  void jacobian_into(std::size_t i, const double* x, double* out_colmajor) const;
  /// Sum_i u_i dX_i(x), column-major n x n.
  void combined_jacobian(const double* x, const double* u, double* out_colmajor) const;
  /// Whether field i has an identically zero Jacobian.
  bool constant_field(std::size_t i) const noexcept { return constant_[i]; }

  std::string to_string() const;

private:
  std::size_t dim_;
  std::vector<Field> fields_;
  std::optional<bool> declared_bounded_;
  std::vector<CompiledExpr> comp_;   // [i * n + j]
  std::vector<CompiledExpr> jac_;    // [(i * n + j) * n + k] = d comp_j / d x_k
  std::vector<std::uint8_t> jac_nonzero_;
  std::vector<bool> constant_;
};

/// Parse `X1 = (..); X2 = (..)` with statements separated by `;` or newlines.
FieldSet parse_field_set(std::string_view text, std::size_t n, std::size_t m,
                         std::optional<bool> declared_bounded = std::nullopt);

/// Zero-based field index.
Vector eval_field(const FieldSet& fields, std::size_t i, const VectorRef& x);
Matrix jacobian(const FieldSet& fields, std::size_t i, const VectorRef& x);

/// [X,Y] = dY X - dX Y, symbolically. Throws ExpressionGrowthError past node_cap.
Field lie_bracket(const Field& x, const Field& y, std::size_t node_cap = kDefaultNodeCap);

Vector eval_field_expr(const Field& f, const VectorRef& x);

struct LieRankResult {
  std::size_t rank = 0;
  /// Bracket depth at which full rank was reached, or the last depth examined.
  std::size_t depth = 1;
  bool full_rank = false;
  std::vector<Vector> basis;
  /// Rank of the accumulated span after each depth 1..depth.
  std::vector<std::size_t> rank_by_depth;
  /// Human-readable status ("Hormander verified at depth d" / "unverified ...").
  std::string message;
};

/// Rank of the iterated bracket span at x, stopping early at full rank.
/// A vector counts toward rank iff its singular value exceeds tol * sigma_1.
LieRankResult lie_rank(const FieldSet& fields, const VectorRef& x, std::size_t max_depth,
                       double tol = 1e-9, std::size_t node_cap = kDefaultNodeCap);

/// Numerical rank of the columns of `vectors` under the relative tolerance rule.
std::size_t numerical_rank(const Matrix& vectors, double tol);

/// Largest |X_i(x)| over random samples from the box [-radius, radius]^n.
double field_bound_spot_check(const FieldSet& fields, double radius, std::size_t samples,
                              std::uint64_t seed);

}  // namespace affext
