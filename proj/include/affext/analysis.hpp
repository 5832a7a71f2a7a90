#pragma once

// Singular-control detection and family-level regularity reports over
// extremals. These are numerical certificates over a finite family, not proofs.

#include <cstddef>
#include <optional>
#include <vector>

#include "affext/control_path.hpp"
#include "affext/dynamics.hpp"
#include "affext/extremals.hpp"
#include "affext/field_set.hpp"
#include "affext/linalg.hpp"

namespace affext {

inline constexpr double kSingularThreshold = 1e-8;

struct GramReport {
  /// Extreme eigenvalues of the (symmetric, PSD) Gram matrix of dE.
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double ratio = 0.0;
  double threshold = kSingularThreshold;
  bool singular = true;
  /// Unit eigenvector for sigma_min, present iff singular. Sign fixed so the
  /// largest-magnitude entry is positive.
  std::optional<Vector> abnormal_candidate;
  Matrix gram;
};

GramReport singularity_report(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double T,
                              double threshold = kSingularThreshold, const IntegratorOptions& opts = {});

struct Assumption4Report {
  std::vector<GramReport> reports;
  /// Indices of singular extremals.
  std::vector<std::size_t> violations;
  bool clean() const noexcept { return violations.empty(); }
};

/// Singularity report on each solution's control, from its own x0 and horizon.
Assumption4Report assumption4_check(const FieldSet& F, const std::vector<ExtremalSolution>& solutions,
                                    double threshold = kSingularThreshold, const IntegratorOptions& opts = {});

struct SolutionRegularity {
  double phi = 0.0;
  double sup_norm = 0.0;
  /// Max adjacent-node difference quotient (the Lipschitz constant of the interpolant).
  double lipschitz = 0.0;
  double final_norm = 0.0;
};

struct ChainStatus {
  bool bounded_cost = false;   // (i)  sup Phi finite
  bool bounded_controls = false;  // (ii) sup |u| finite and grid-stable
  bool lipschitz_controls = false;  // (iii) |u(T)|, Lip(u) finite and grid-stable
  bool all() const noexcept { return bounded_cost && bounded_controls && lipschitz_controls; }
};

struct LipschitzCertificate {
  double sup_phi = 0.0;
  double K_bound = 0.0;
  /// max(K_quotient, K_final): one constant bounding |u(T)| and Lip(u).
  double K_lip = 0.0;
  double K_quotient = 0.0;
  double K_final = 0.0;
  /// Same quantities on the refined family.
  double K_bound_refined = 0.0;
  double K_lip_refined = 0.0;
  /// K_lip(N) / K_lip(2N); 1 when both vanish.
  double grid_stability = 1.0;
  double bound_stability = 1.0;
  ChainStatus chain;
  bool certified = false;
  std::vector<SolutionRegularity> per_solution;
  std::vector<SolutionRegularity> per_solution_refined;
};

/// Stability band for the N vs 2N ratios.
inline constexpr double kStabilityLow = 0.5;
inline constexpr double kStabilityHigh = 2.0;

LipschitzCertificate lipschitz_certificate(const std::vector<ExtremalSolution>& solutions,
                                           const std::vector<ExtremalSolution>& refined);

struct RefinedFamily {
  std::vector<ExtremalSolution> solutions;
  /// Indices (into the input) that failed to re-converge at the finer grid.
  std::vector<std::size_t> lost;
};

/// Re-shoots every solution on a grid of `factor` times as many intervals,
/// warm-started from its own p0.
RefinedFamily refine_family(const FieldSet& F, const Lagrangian& L, const VectorRef& target,
                            const std::vector<ExtremalSolution>& solutions, const ShootOptions& opts,
                            std::size_t factor = 2);

struct CostateBoundReport {
  double R_traj = 0.0;
  double R_costate = 0.0;
  double R_traj_refined = 0.0;
  double R_costate_refined = 0.0;
  /// max relative change between the two resolutions (0 when no refined family).
  double relative_change = 0.0;
  bool finite = true;
};

CostateBoundReport costate_bound_check(const std::vector<ExtremalSolution>& solutions,
                                       const std::vector<ExtremalSolution>& refined = {});

}  // namespace affext
