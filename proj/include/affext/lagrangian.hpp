#pragma once

// Autonomous Lagrangians L(x, u), the Legendre-type inverse w = (d_uL)^{-1},
// the Hamiltonian and the cost functional.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "affext/control_path.hpp"
#include "affext/dynamics.hpp"
#include "affext/expr.hpp"
#include "affext/field_set.hpp"
#include "affext/linalg.hpp"

namespace affext {

class Lagrangian {
public:
  /// `expr` is over x1..xn then u1..um. A non-smooth expression (abs) can be
  /// evaluated but has no derivatives.
  Lagrangian(std::size_t n, std::size_t m, Expr expr);

  std::size_t state_dim() const noexcept { return n_; }
  std::size_t control_dim() const noexcept { return m_; }
  const Expr& expr() const noexcept { return expr_; }
  bool smooth() const noexcept { return smooth_; }
  std::string to_string() const;

  double eval(const VectorRef& x, const VectorRef& u) const;
  Vector d_x(const VectorRef& x, const VectorRef& u) const;
  Vector d_u(const VectorRef& x, const VectorRef& u) const;
  Matrix d2_u(const VectorRef& x, const VectorRef& u) const;

  // Unchecked kernels over a packed (x, u) buffer of length n + m.
  double eval_packed(const double* xu) const;
  void d_x_packed(const double* xu, double* out) const;
  void d_u_packed(const double* xu, double* out) const;
  void d2_u_packed(const double* xu, double* out_colmajor) const;

private:
  void require_smooth() const;
  std::vector<double> pack(const VectorRef& x, const VectorRef& u) const;

  std::size_t n_, m_;
  Expr expr_;
  bool smooth_;
  CompiledExpr value_;
  std::vector<CompiledExpr> dx_, du_, duu_;
};

/// Parses one scalar expression over x1..xn, u1..um.
Lagrangian parse_lagrangian(std::string_view text, std::size_t n, std::size_t m, bool allow_abs = false);

struct LegendreOptions {
  double tol = 1e-10;
  std::size_t max_iter = 50;
  std::size_t max_halvings = 30;
};

/// Reusable damped-Newton inverter with preallocated scratch; not thread-safe,
/// one instance per worker.
class LegendreSolver {
public:
  explicit LegendreSolver(const Lagrangian& L, LegendreOptions opts = {});

  /// Overwrites u (the warm start on entry) with w(x, z).
  void solve(const double* x, const double* z, double* u);

private:
  double residual(const double* u, double* r);

  const Lagrangian& L_;
  LegendreOptions opts_;
  std::size_t n_, m_;
  std::vector<double> xu_, z_, g_, trial_g_, trial_, step_, H_;
};

/// u with |d_uL(x,u) - z| < tol by damped Newton from u0.
/// Throws DiffeomorphismError when Newton stagnates.
Vector legendre_inverse(const Lagrangian& L, const VectorRef& x, const VectorRef& z, const VectorRef& u0,
                        const LegendreOptions& opts = {});

/// Z(x,p) = (p . X_i(x))_i.
Vector momentum(const FieldSet& F, const VectorRef& x, const VectorRef& p);

struct HamiltonianValue {
  double H;
  Vector Z;
  /// w(x, Z(x,p)).
  Vector w;
};

HamiltonianValue hamiltonian(const Lagrangian& L, const FieldSet& F, const VectorRef& x, const VectorRef& p,
                             const VectorRef& u0, const LegendreOptions& opts = {});
HamiltonianValue hamiltonian(const Lagrangian& L, const FieldSet& F, const VectorRef& x, const VectorRef& p);

/// Trapezoid of L(xi, u) on the RK4 step grid, one-sided control samples per step.
double phi_functional(const Lagrangian& L, const FieldSet& F, const ControlPath& u, const VectorRef& x0,
                      double T, const IntegratorOptions& opts = {});

/// theta, psi, phi as expressions in one variable r.
struct GrowthProfile {
  Expr theta, psi, phi;
};

GrowthProfile parse_growth_profile(std::string_view theta, std::string_view psi, std::string_view phi);

struct GrowthReport {
  /// min over samples of L(x,u) - theta(|u|) + psi(|x|).
  double lower_margin;
  /// min over samples of phi(|x|)(|u|^2 + 1) - |d_xL(x,u)|.
  double gradient_margin;
  /// min over sampled r of theta, psi, phi (all must be >= 0).
  double profile_min;
  Vector worst_lower_x, worst_lower_u;
  std::size_t samples;
  std::size_t violations;
  bool ok;
};

struct SampleBox {
  double x_radius = 2.0;
  double u_radius = 2.0;
};

GrowthReport growth_spot_check(const Lagrangian& L, const GrowthProfile& profile, const SampleBox& box,
                               std::size_t samples, std::uint64_t seed = 0);

}  // namespace affext
