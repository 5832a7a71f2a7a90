#include "affext/analysis.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

#include "affext/errors.hpp"

namespace affext {

GramReport singularity_report(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double T,
                              double threshold, const IntegratorOptions& opts) {
  if (!(threshold >= 0.0)) throw InvalidArgument("singularity threshold must be non-negative");
  const Linearization lin(F, u, x0, T, opts);
  GramReport r;
  r.threshold = threshold;
  r.gram = lin.gram();
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(r.gram);
  const Vector& ev = eig.eigenvalues();  // ascending
  r.sigma_min = std::max(ev[0], 0.0);
  r.sigma_max = std::max(ev[ev.size() - 1], 0.0);
  r.ratio = r.sigma_max > 0.0 ? r.sigma_min / r.sigma_max : 0.0;
  r.singular = r.ratio < threshold;
  if (r.singular) {
    Vector c = eig.eigenvectors().col(0).normalized();
    Eigen::Index big = 0;
    c.cwiseAbs().maxCoeff(&big);
    if (c[big] < 0.0) c = -c;
    r.abnormal_candidate = std::move(c);
  }
  return r;
}

Assumption4Report assumption4_check(const FieldSet& F, const std::vector<ExtremalSolution>& solutions,
                                    double threshold, const IntegratorOptions& opts) {
  Assumption4Report out;
  for (std::size_t i = 0; i < solutions.size(); ++i) {
    const ExtremalSolution& s = solutions[i];
    out.reports.push_back(singularity_report(F, s.u, s.xi.x0, s.u.horizon(), threshold, opts));
    if (out.reports.back().singular) out.violations.push_back(i);
  }
  return out;
}

namespace {

SolutionRegularity regularity(const ExtremalSolution& s) {
  const ControlPath& u = s.u;
  return {s.phi, u.sup_norm(), u.lipschitz(), u.node(u.intervals()).norm()};
}

// a / b with 0 / 0 = 1 and x / 0 = inf.
double stability(double a, double b) {
  if (a == 0.0 && b == 0.0) return 1.0;
  if (b == 0.0) return std::numeric_limits<double>::infinity();
  return a / b;
}

bool stable(double ratio) { return ratio >= kStabilityLow && ratio <= kStabilityHigh; }

struct Totals {
  double phi = 0.0, bound = 0.0, quotient = 0.0, final_norm = 0.0;
  bool finite = true;
};

Totals fold(const std::vector<SolutionRegularity>& regs) {
  Totals t;
  for (const SolutionRegularity& r : regs) {
    t.finite = t.finite && std::isfinite(r.phi) && std::isfinite(r.sup_norm) && std::isfinite(r.lipschitz) &&
               std::isfinite(r.final_norm);
    t.phi = std::max(t.phi, r.phi);
    t.bound = std::max(t.bound, r.sup_norm);
    t.quotient = std::max(t.quotient, r.lipschitz);
    t.final_norm = std::max(t.final_norm, r.final_norm);
  }
  return t;
}

}  // namespace

LipschitzCertificate lipschitz_certificate(const std::vector<ExtremalSolution>& solutions,
                                           const std::vector<ExtremalSolution>& refined) {
  LipschitzCertificate c;
  for (const ExtremalSolution& s : solutions) c.per_solution.push_back(regularity(s));
  for (const ExtremalSolution& s : refined) c.per_solution_refined.push_back(regularity(s));
  const Totals a = fold(c.per_solution);
  const Totals b = fold(c.per_solution_refined);

  c.sup_phi = a.phi;
  c.K_bound = a.bound;
  c.K_quotient = a.quotient;
  c.K_final = a.final_norm;
  c.K_lip = std::max(a.quotient, a.final_norm);
  c.K_bound_refined = b.bound;
  c.K_lip_refined = std::max(b.quotient, b.final_norm);
  c.grid_stability = stability(c.K_lip, c.K_lip_refined);
  c.bound_stability = stability(c.K_bound, c.K_bound_refined);

  // A family and its refinement must describe the same extremals.
  const bool matched = solutions.size() == refined.size();
  c.chain.bounded_cost = a.finite && std::isfinite(c.sup_phi);
  c.chain.bounded_controls = matched && a.finite && b.finite && stable(c.bound_stability);
  c.chain.lipschitz_controls = matched && a.finite && b.finite && stable(c.grid_stability);
  c.certified = c.chain.all();
  return c;
}

RefinedFamily refine_family(const FieldSet& F, const Lagrangian& L, const VectorRef& target,
                            const std::vector<ExtremalSolution>& solutions, const ShootOptions& opts,
                            std::size_t factor) {
  if (factor == 0) throw InvalidArgument("refinement factor must be positive");
  RefinedFamily out;
  for (std::size_t i = 0; i < solutions.size(); ++i) {
    const ExtremalSolution& s = solutions[i];
    ShootOptions o = opts;
    o.grid = s.u.intervals() * factor;
    try {
      out.solutions.push_back(shoot_extremal(F, L, s.xi.x0, target, s.u.horizon(), s.p0, o));
    } catch (const Error&) {
      out.lost.push_back(i);
    }
  }
  return out;
}

namespace {

double max_row_norm(const Matrix& a) {
  double r = 0.0;
  for (Eigen::Index k = 0; k < a.rows(); ++k) r = std::max(r, a.row(k).norm());
  return r;
}

double relative(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace

CostateBoundReport costate_bound_check(const std::vector<ExtremalSolution>& solutions,
                                       const std::vector<ExtremalSolution>& refined) {
  CostateBoundReport r;
  for (const ExtremalSolution& s : solutions) {
    r.R_traj = std::max(r.R_traj, max_row_norm(s.xi.states));
    r.R_costate = std::max(r.R_costate, max_row_norm(s.p));
  }
  for (const ExtremalSolution& s : refined) {
    r.R_traj_refined = std::max(r.R_traj_refined, max_row_norm(s.xi.states));
    r.R_costate_refined = std::max(r.R_costate_refined, max_row_norm(s.p));
  }
  if (!refined.empty()) {
    r.relative_change = std::max(relative(r.R_traj, r.R_traj_refined), relative(r.R_costate, r.R_costate_refined));
  }
  r.finite = std::isfinite(r.R_traj) && std::isfinite(r.R_costate) && std::isfinite(r.R_traj_refined) &&
             std::isfinite(r.R_costate_refined);
  return r;
}

}  // namespace affext
