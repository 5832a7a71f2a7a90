#pragma once

// Local inversion charts (s, beta) -> control steering x0 to beta in time s,
// built around an anchor (t, u) from a finite dictionary of C^1 directions.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "affext/control_path.hpp"
#include "affext/dynamics.hpp"
#include "affext/expr.hpp"
#include "affext/field_set.hpp"
#include "affext/linalg.hpp"

namespace affext {

/// One control-space direction: m expressions in the single variable s.
struct Direction {
  std::vector<Expr> components;
  /// Lipschitz constant of s -> v(s) on [0, T] (Euclidean norm).
  double lipschitz = 0.0;
  std::string label;

  Vector eval(double s) const;
  /// Node samples on an N-interval grid over [0, T].
  ControlPath sample(double T, std::size_t N) const;
  std::string to_string() const;
};

class Dictionary {
public:
  Dictionary() = default;
  explicit Dictionary(std::vector<Direction> directions);

  /// Constants e_i per channel, then sin(k pi s/T), cos(k pi s/T) per channel for k = 1..k_max.
  static Dictionary standard(std::size_t m, double T, std::size_t k_max = 8);
  /// Constants only.
  static Dictionary constants(std::size_t m);

  std::size_t size() const noexcept { return dirs_.size(); }
  const Direction& operator[](std::size_t i) const { return dirs_[i]; }
  const std::vector<Direction>& directions() const noexcept { return dirs_; }

private:
  std::vector<Direction> dirs_;
};

/// Parses "expr1, ..., exprm" in the variable s. The Lipschitz constant is
/// taken as the sampled maximum of |v'(s)| over [0, T] times (1 + 1e-6).
Direction parse_direction(std::string_view text, std::size_t m, double T);

struct BasisSelection {
  std::vector<std::size_t> indices;
  /// phi(j, k) = (dE_{t,x0}(u) v_k)_j.
  Matrix phi;
  double det = 0.0;
};

/// Greedy pivoted volume selection of n dictionary directions.
/// Throws BasisDeficiencyError when fewer than n independent images exist.
BasisSelection select_basis(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double t,
                            const Dictionary& dict, const IntegratorOptions& opts = {});

struct ChartOptions {
  /// <= 0 is rejected; NaN selects 0.1 (1 + |E_t(u)|).
  double r_init = std::numeric_limits<double>::quiet_NaN();
  double det_tol = 0.1;
  std::size_t max_halvings = 20;
  double r_min = 1e-8;
  double newton_tol = 1e-10;
  std::size_t newton_max_iter = 50;
  std::uint64_t probe_seed = 0;
  IntegratorOptions integrator;
};

struct ChartLipschitz {
  /// Declared time-Lipschitz bound on every emitted control.
  double k = 0.0;
  /// Probe-based estimates of the value map and its differential.
  double k_hat = 0.0;
  double ell_hat = 0.0;
};

struct InversionChart {
  FieldSet fields;
  Vector x0;
  double t = 0.0;
  ControlPath anchor;
  Vector beta0;
  Dictionary dictionary;
  BasisSelection basis;
  std::vector<ControlPath> directions;  // sampled on the anchor grid
  double r = 0.0;
  double det_anchor = 0.0;
  double det_floor = 0.0;
  /// Bounds on |alpha_i| over the chart used for the declared k.
  Vector alpha_bound;
  ChartLipschitz lipschitz;
  std::size_t halvings = 0;
  ChartOptions options;

  bool contains(double s, const VectorRef& beta) const;
};

/// Lip(v) <= k up to a relative rounding allowance of 1e-9.
bool within_declared_lipschitz(const InversionChart& chart, const ControlPath& v);

struct ChartEvalInfo {
  Vector alpha;
  double residual = 0.0;
  double det = 0.0;
  std::size_t iterations = 0;
};

/// Radius search on the probe set {t-r, t, t+r} x {beta0, beta0 +- r e_k}.
/// Throws ChartError when r falls below r_min, InvalidArgument on r_init <= 0.
InversionChart build_chart(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double t,
                           const Dictionary& dict, const ChartOptions& opts = {});

/// Rebuilds a chart from serialized parts without re-running the radius search.
InversionChart assemble_chart(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double t,
                              const Dictionary& dict, const std::vector<std::size_t>& indices, double r,
                              const Vector& alpha_bound, const ChartLipschitz& lip, const ChartOptions& opts);

/// Newton on alpha for E_s(u + sum alpha_i v_i) = beta. Throws InvalidArgument
/// outside the chart domain and ChartError when Newton fails or the emitted
/// control exceeds the declared Lipschitz bound.
ControlPath chart_eval(const InversionChart& chart, double s, const VectorRef& beta, ChartEvalInfo* info = nullptr,
                       const Vector* warm = nullptr);

struct ChartLipschitzEstimate {
  double k_hat = 0.0;
  double ell_hat = 0.0;
  /// Largest time-Lipschitz constant among emitted controls.
  double max_time_lipschitz = 0.0;
  std::size_t pairs = 0;
  std::size_t skipped = 0;
};

/// Finite-difference estimates over `probes` random pairs in the chart.
/// Pairs closer than 1e-12 are skipped.
ChartLipschitzEstimate chart_lipschitz_estimate(const InversionChart& chart, std::size_t probes,
                                                std::uint64_t seed = 0);

/// Same, on explicit pairs of (s, beta) points.
ChartLipschitzEstimate chart_lipschitz_estimate(const InversionChart& chart,
                                                const std::vector<std::pair<Vector, Vector>>& pairs);

}  // namespace affext
