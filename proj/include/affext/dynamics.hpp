#pragma once

// Fixed-step RK4 integration of xi' = sum_i u_i(s) X_i(xi), the end-point map,
// its fundamental solution and the forward/adjoint differential.

#include <cstddef>
#include <vector>

#include "affext/control_path.hpp"
#include "affext/field_set.hpp"
#include "affext/linalg.hpp"

namespace affext {

struct IntegratorOptions {
  /// RK4 steps per control interval.
  std::size_t substeps = 4;
  /// State norm beyond which integration aborts with DivergenceError.
  double blowup = 1e12;
  /// Condition number of Psi beyond which the solution is flagged.
  double cond_limit = 1e12;
};

/// Uniform step grid for horizon `T` with control path `u`: when T equals the
/// path horizon, steps align with control cells; otherwise the step count is
/// ceil(T / h_u) * substeps.
struct StepGrid {
  std::size_t steps;
  double T;
  double h;
  bool aligned;
  double time(std::size_t k) const noexcept { return T * static_cast<double>(k) / static_cast<double>(steps); }
};

StepGrid step_grid(const ControlPath& u, double T, const IntegratorOptions& opts);

struct Trajectory {
  std::vector<double> times;
  /// (M+1) x n, row k = xi(times[k]).
  Matrix states;
  Vector x0;

  std::size_t steps() const noexcept { return times.size() - 1; }
  Vector state(std::size_t k) const { return states.row(static_cast<Eigen::Index>(k)).transpose(); }
  Vector final_state() const { return state(steps()); }
};

struct FundamentalSolution {
  std::vector<double> times;
  std::vector<Matrix> psi;
  std::vector<double> condition;
  double max_condition = 1.0;
  bool ill_conditioned = false;
};

Trajectory integrate(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double T,
                     const IntegratorOptions& opts = {});

Vector endpoint(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double T,
                const IntegratorOptions& opts = {});

/// Integrates Psi' = A Psi jointly with the state and checks that the state
/// part reproduces `traj`.
FundamentalSolution fundamental_solution(const FieldSet& F, const ControlPath& u, const Trajectory& traj,
                                         const IntegratorOptions& opts = {});

/// Everything needed to apply dE_{T,x0}(u) and its adjoint, cached on the step grid.
class Linearization {
public:
  Linearization(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double T,
                const IntegratorOptions& opts = {});

  const Trajectory& trajectory() const noexcept { return traj_; }
  const FundamentalSolution& fundamental() const noexcept { return fund_; }
  const StepGrid& grid() const noexcept { return grid_; }
  std::size_t dim() const noexcept { return n_; }
  std::size_t channels() const noexcept { return m_; }

  /// Psi(T) Psi(s_k)^{-1} B(s_k), n x m.
  const Matrix& transport(std::size_t k) const { return g_[k]; }
  const Matrix& psi_inverse(std::size_t k) const { return psi_inv_[k]; }
  /// One-sided control samples at step node k.
  const Vector& control_right(std::size_t k) const { return u_right_[k]; }
  const Vector& control_left(std::size_t k) const { return u_left_[k]; }

  /// dE(v) by per-step trapezoid with one-sided samples of v. v is sampled by
  /// time and may live on any grid.
  Vector apply(const ControlPath& v) const;
  /// s -> B(s)^T Psi(s)^{-T} Psi(T)^T lambda as a Linear path on the step grid.
  ControlPath adjoint(const VectorRef& lambda) const;
  /// Sum_k w_k G_k G_k^T with trapezoid weights, symmetrized.
  Matrix gram() const;

private:
  std::size_t n_, m_;
  StepGrid grid_;
  Trajectory traj_;
  FundamentalSolution fund_;
  std::vector<Matrix> psi_inv_;
  std::vector<Matrix> g_;
  std::vector<Vector> u_right_, u_left_;
};

/// The public forms require v on the same grid as u and T equal to the path horizon.
Vector apply_dE(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double T, const ControlPath& v,
                const IntegratorOptions& opts = {});
ControlPath adjoint_dE(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double T,
                       const VectorRef& lambda, const IntegratorOptions& opts = {});
Matrix gram_matrix(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double T,
                   const IntegratorOptions& opts = {});

}  // namespace affext
