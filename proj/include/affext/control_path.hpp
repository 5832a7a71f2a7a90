#pragma once

// Controls u : [0,T] -> R^m sampled on a uniform grid.

#include <cstddef>
#include <functional>

#include "affext/linalg.hpp"

namespace affext {

class ControlPath {
public:
  /// Linear: piecewise-linear interpolation of the nodes.
  /// Hold: zero-order hold, cell k carries values[k]; the last row is unused
  /// except as the value reported at s = T by node().
  enum class Interpolation { Linear, Hold };

  ControlPath(double T, Matrix values, Interpolation interp = Interpolation::Linear);

  static ControlPath zero(double T, std::size_t N, std::size_t m);
  static ControlPath constant(double T, std::size_t N, const VectorRef& value);
  static ControlPath from_function(double T, std::size_t N, std::size_t m,
                                   const std::function<Vector(double)>& fn,
                                   Interpolation interp = Interpolation::Linear);

  double horizon() const noexcept { return T_; }
  std::size_t intervals() const noexcept { return static_cast<std::size_t>(values_.rows()) - 1; }
  std::size_t channels() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  double step() const noexcept { return T_ / static_cast<double>(intervals()); }
  Interpolation interpolation() const noexcept { return interp_; }
  const Matrix& values() const noexcept { return values_; }
  Vector node(std::size_t k) const { return values_.row(static_cast<Eigen::Index>(k)).transpose(); }
  double time(std::size_t k) const noexcept { return T_ * static_cast<double>(k) / static_cast<double>(intervals()); }

  /// Value at s; times outside [0,T] take the boundary value.
  Vector operator()(double s) const;
  /// One-sided limits u(s+) and u(s-); they differ only at Hold jumps.
  void sample_right(double s, double* out) const;
  void sample_left(double s, double* out) const;
  /// Aligned sampling inside cell k at fraction theta in [0,1].
  void sample_cell(std::size_t k, double theta, double* out) const;

  /// Exact L² norm of the interpolant.
  double l2_norm() const;
  /// Max sup-norm over the nodes.
  double sup_norm() const;
  /// Max adjacent-node difference quotient |u_{k+1} - u_k| / h.
  double lipschitz() const;

  ControlPath& operator+=(const ControlPath& other);
  ControlPath& operator-=(const ControlPath& other);
  ControlPath& operator*=(double c);

private:
  void require_compatible(const ControlPath& other) const;

  double T_;
  Matrix values_;  // (N+1) x m
  Interpolation interp_;
};

ControlPath operator+(ControlPath a, const ControlPath& b);
ControlPath operator-(ControlPath a, const ControlPath& b);
ControlPath operator*(double c, ControlPath a);

/// L² pairing by trapezoid on the finer of two nested grids, using one-sided
/// samples in each cell. Horizons must agree.
double inner_product(const ControlPath& a, const ControlPath& b);

/// Exact L² distance of two Linear paths on nested grids (trapezoid otherwise).
double l2_distance(const ControlPath& a, const ControlPath& b);

}  // namespace affext
