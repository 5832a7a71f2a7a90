#pragma once

// Constrained extremals by Hamiltonian shooting on the initial costate.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "affext/control_path.hpp"
#include "affext/dynamics.hpp"
#include "affext/field_set.hpp"
#include "affext/lagrangian.hpp"
#include "affext/linalg.hpp"

namespace affext {

struct ShootOptions {
  /// Control intervals N of the returned path.
  std::size_t grid = 32;
  IntegratorOptions integrator;
  LegendreOptions legendre;
  double tol = 1e-8;
  std::size_t max_iter = 100;
  /// Central-difference step is fd_step * (1 + |p0|).
  double fd_step = 1e-6;
  std::size_t max_backtracks = 30;
  /// Relative cutoff for singular values in the least-squares Newton step.
  double rcond = 1e-10;
  /// Converged solutions whose relative Hamiltonian drift exceeds drift_tol are
  /// re-shot with doubled substeps, up to max_substeps.
  double drift_tol = 1e-6;
  std::size_t max_substeps = 64;
};

/// Solution of xi' = sum w_i X_i, p' = -sum w_i dX_i^T p + d_xL with
/// w = w(xi, Z(xi, p)) on the RK4 step grid.
struct HamiltonianFlow {
  std::vector<double> times;
  Matrix xi;  // (M+1) x n
  Matrix p;   // (M+1) x n
  Matrix w;   // (M+1) x m
  std::vector<double> H;
};

HamiltonianFlow hamiltonian_flow(const FieldSet& F, const Lagrangian& L, const VectorRef& x0, const VectorRef& p0,
                                 double T, const ShootOptions& opts = {});

struct ExtremalResiduals {
  double endpoint_gap = 0.0;
  /// max over step nodes of |d_uL(xi, w) - Z(xi, p)|.
  double stationarity = 0.0;
  /// max_s |H(s) - H(0)| / (1 + |H(0)|).
  double hamiltonian_drift = 0.0;
};

struct ExtremalSolution {
  /// Feedback control sampled at the control nodes (Linear, N intervals).
  ControlPath u;
  /// State and costate on the RK4 step grid of the Hamiltonian flow.
  Trajectory xi;
  Matrix p;
  Vector p0;
  Vector lambda;
  double phi = 0.0;
  double H0 = 0.0;
  ExtremalResiduals residuals;
  std::size_t iterations = 0;
};

/// Newton on p0 driving xi(T) to `target`. Throws ConvergenceError (with the
/// best residual) after max_iter; DiffeomorphismError propagates.
ExtremalSolution shoot_extremal(const FieldSet& F, const Lagrangian& L, const VectorRef& x0, const VectorRef& target,
                                double T, const VectorRef& p0, const ShootOptions& opts = {});

struct SeedFailure {
  std::size_t seed_index;
  std::string reason;
  double best_residual;
};

struct MultiStartResult {
  /// Distinct extremals sorted by (phi, |lambda|).
  std::vector<ExtremalSolution> solutions;
  std::size_t converged = 0;
  std::vector<SeedFailure> failures;
};

MultiStartResult multi_start(const FieldSet& F, const Lagrangian& L, const VectorRef& x0, const VectorRef& target,
                             double T, const std::vector<Vector>& seeds, const ShootOptions& opts = {},
                             double dedup_tol = 1e-5);

/// 0 followed by `count - 1` Gaussian samples scaled by `scale`
/// (callers default it to |target - x0| / T).
std::vector<Vector> default_seeds(std::size_t n, std::size_t count, double scale, std::uint64_t seed);

struct CostatePath {
  std::vector<double> times;
  Matrix p;  // (M+1) x n
};

/// p(s) = Psi(s)^{-T} Psi(T)^T lambda - Psi(s)^{-T} int_s^T Psi(r)^T d_xL dr on the step grid.
CostatePath costate_from_lambda(const FieldSet& F, const Lagrangian& L, const ControlPath& u, const VectorRef& x0,
                                double T, const VectorRef& lambda, const IntegratorOptions& opts = {});
CostatePath costate_from_lambda(const Linearization& lin, const Lagrangian& L, const VectorRef& lambda);

struct ExtremalityResidual {
  double feasibility;
  double stationarity;
};

ExtremalityResidual extremality_residual(const FieldSet& F, const Lagrangian& L, const ControlPath& u,
                                         const VectorRef& x0, const VectorRef& target, double T,
                                         const VectorRef& lambda, const IntegratorOptions& opts = {});

}  // namespace affext
