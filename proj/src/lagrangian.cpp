#include "affext/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <span>

#include "affext/errors.hpp"

namespace affext {

Lagrangian::Lagrangian(std::size_t n, std::size_t m, Expr expr)
    : n_(n), m_(m), expr_(std::move(expr)), smooth_(!expr_.uses_abs()), value_(expr_) {
  if (n_ == 0 || m_ == 0) throw InvalidArgument("Lagrangian needs n, m >= 1");
  if (expr_.slot_bound() > n_ + m_) throw InvalidArgument("Lagrangian references variables beyond (x, u)");
  if (!smooth_) return;
  for (std::size_t j = 0; j < n_; ++j) dx_.emplace_back(expr_.derivative(j));
  std::vector<Expr> du;
  for (std::size_t i = 0; i < m_; ++i) du.push_back(expr_.derivative(n_ + i));
  for (const Expr& d : du) du_.emplace_back(d);
  for (std::size_t c = 0; c < m_; ++c) {
    for (std::size_t r = 0; r < m_; ++r) duu_.emplace_back(du[r].derivative(n_ + c));
  }
}

std::string Lagrangian::to_string() const { return expr_.to_string(SymbolTable::state_control(n_, m_)); }

void Lagrangian::require_smooth() const {
  if (!smooth_) throw NonSmoothError("Lagrangian uses abs and has no derivatives");
}

std::vector<double> Lagrangian::pack(const VectorRef& x, const VectorRef& u) const {
  if (static_cast<std::size_t>(x.size()) != n_ || static_cast<std::size_t>(u.size()) != m_) {
    throw InvalidArgument("Lagrangian argument has wrong dimension");
  }
  std::vector<double> xu(n_ + m_);
  for (std::size_t j = 0; j < n_; ++j) xu[j] = x[static_cast<Eigen::Index>(j)];
  for (std::size_t i = 0; i < m_; ++i) xu[n_ + i] = u[static_cast<Eigen::Index>(i)];
  return xu;
}

double Lagrangian::eval_packed(const double* xu) const { return value_({xu, n_ + m_}); }

void Lagrangian::d_x_packed(const double* xu, double* out) const {
  const std::span<const double> v(xu, n_ + m_);
  for (std::size_t j = 0; j < n_; ++j) out[j] = dx_[j](v);
}

void Lagrangian::d_u_packed(const double* xu, double* out) const {
  const std::span<const double> v(xu, n_ + m_);
  for (std::size_t i = 0; i < m_; ++i) out[i] = du_[i](v);
}

void Lagrangian::d2_u_packed(const double* xu, double* out) const {
  const std::span<const double> v(xu, n_ + m_);
  for (std::size_t k = 0; k < m_ * m_; ++k) out[k] = duu_[k](v);
}

namespace {

template <class T>
T checked(T value, const char* what) {
  bool finite;
  if constexpr (std::is_same_v<T, double>) {
    finite = std::isfinite(value);
  } else {
    finite = value.allFinite();
  }
  if (!finite) throw NonFiniteError(std::string(what) + " evaluated to a non-finite value");
  return value;
}

}  // namespace

double Lagrangian::eval(const VectorRef& x, const VectorRef& u) const {
  return checked(eval_packed(pack(x, u).data()), "Lagrangian");
}

Vector Lagrangian::d_x(const VectorRef& x, const VectorRef& u) const {
  require_smooth();
  Vector out(n_);
  d_x_packed(pack(x, u).data(), out.data());
  return checked(std::move(out), "d_xL");
}

Vector Lagrangian::d_u(const VectorRef& x, const VectorRef& u) const {
  require_smooth();
  Vector out(m_);
  d_u_packed(pack(x, u).data(), out.data());
  return checked(std::move(out), "d_uL");
}

Matrix Lagrangian::d2_u(const VectorRef& x, const VectorRef& u) const {
  require_smooth();
  Matrix out(m_, m_);
  d2_u_packed(pack(x, u).data(), out.data());
  return checked(std::move(out), "d2_uL");
}

Lagrangian parse_lagrangian(std::string_view text, std::size_t n, std::size_t m, bool allow_abs) {
  return Lagrangian(n, m, parse_expression(text, SymbolTable::state_control(n, m), {.allow_abs = allow_abs}));
}

LegendreSolver::LegendreSolver(const Lagrangian& L, LegendreOptions opts)
    : L_(L), opts_(opts), n_(L.state_dim()), m_(L.control_dim()), xu_(n_ + m_), z_(m_), g_(m_),
      trial_g_(m_), trial_(m_), step_(m_), H_(m_ * m_) {
  if (!L.smooth()) throw NonSmoothError("Legendre inverse needs a smooth Lagrangian");
}

double LegendreSolver::residual(const double* u, double* r) {
  std::copy(u, u + m_, xu_.begin() + static_cast<std::ptrdiff_t>(n_));
  L_.d_u_packed(xu_.data(), r);
  double acc = 0.0;
  for (std::size_t i = 0; i < m_; ++i) {
    r[i] -= z_[i];
    acc += r[i] * r[i];
  }
  return std::isfinite(acc) ? std::sqrt(acc) : std::numeric_limits<double>::infinity();
}

namespace {

// Solves H step = -g in place for small systems; false when H is singular.
bool newton_direction(std::size_t m, const std::vector<double>& H, const std::vector<double>& g,
                      std::vector<double>& step) {
  using Small = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8>;
  using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 8, 1>;
  const auto mi = static_cast<Eigen::Index>(m);
  if (m <= 8) {
    const Small A = Eigen::Map<const Matrix>(H.data(), mi, mi);
    if (!A.allFinite()) return false;
    const Eigen::FullPivLU<Small> lu(A);
    if (!lu.isInvertible()) return false;
    const SmallVec s = lu.solve(-Eigen::Map<const Vector>(g.data(), mi));
    std::copy(s.data(), s.data() + m, step.begin());
  } else {
    const Matrix A = Eigen::Map<const Matrix>(H.data(), mi, mi);
    if (!A.allFinite()) return false;
    const Eigen::FullPivLU<Matrix> lu(A);
    if (!lu.isInvertible()) return false;
    const Vector s = lu.solve(-Eigen::Map<const Vector>(g.data(), mi));
    std::copy(s.data(), s.data() + m, step.begin());
  }
  return true;
}

}  // namespace

void LegendreSolver::solve(const double* x, const double* z, double* u) {
  std::copy(x, x + n_, xu_.begin());
  std::copy(z, z + m_, z_.begin());
  double res = residual(u, g_.data());
  if (!std::isfinite(res)) throw NonFiniteError("d_uL is non-finite at the warm start");
  for (std::size_t it = 0; it < opts_.max_iter; ++it) {
    if (res < opts_.tol) return;
    std::copy(u, u + m_, xu_.begin() + static_cast<std::ptrdiff_t>(n_));
    L_.d2_u_packed(xu_.data(), H_.data());
    if (!newton_direction(m_, H_, g_, step_)) {
      throw DiffeomorphismError("d2_uL singular during Legendre inversion (residual " + std::to_string(res) + ")");
    }
    double t = 1.0;
    bool accepted = false;
    for (std::size_t k = 0; k <= opts_.max_halvings; ++k, t *= 0.5) {
      for (std::size_t i = 0; i < m_; ++i) trial_[i] = u[i] + t * step_[i];
      const double r = residual(trial_.data(), trial_g_.data());
      if (r < res) {
        std::copy(trial_.begin(), trial_.end(), u);
        g_.swap(trial_g_);
        res = r;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (res < opts_.tol) return;
      throw DiffeomorphismError("Legendre Newton stagnated at residual " + std::to_string(res));
    }
  }
  if (res < opts_.tol) return;
  throw DiffeomorphismError("Legendre Newton did not converge in " + std::to_string(opts_.max_iter) +
                            " iterations (residual " + std::to_string(res) + ")");
}

Vector legendre_inverse(const Lagrangian& L, const VectorRef& x, const VectorRef& z, const VectorRef& u0,
                        const LegendreOptions& opts) {
  if (!L.smooth()) throw NonSmoothError("Legendre inverse needs a smooth Lagrangian");
  if (static_cast<std::size_t>(x.size()) != L.state_dim() || static_cast<std::size_t>(z.size()) != L.control_dim() ||
      static_cast<std::size_t>(u0.size()) != L.control_dim()) {
    throw InvalidArgument("Legendre inverse argument has wrong dimension");
  }
  LegendreSolver solver(L, opts);
  const Vector xc = x, zc = z;
  Vector u = u0;
  solver.solve(xc.data(), zc.data(), u.data());
  return u;
}

Vector momentum(const FieldSet& F, const VectorRef& x, const VectorRef& p) {
  if (static_cast<std::size_t>(p.size()) != F.dim()) throw InvalidArgument("costate has wrong dimension");
  return F.frame(x).transpose() * p;
}

HamiltonianValue hamiltonian(const Lagrangian& L, const FieldSet& F, const VectorRef& x, const VectorRef& p,
                             const VectorRef& u0, const LegendreOptions& opts) {
  if (L.state_dim() != F.dim() || L.control_dim() != F.count()) {
    throw InvalidArgument("Lagrangian and field set dimensions differ");
  }
  HamiltonianValue out;
  out.Z = momentum(F, x, p);
  out.w = legendre_inverse(L, x, out.Z, u0, opts);
  out.H = out.w.dot(out.Z) - L.eval(x, out.w);
  return out;
}

HamiltonianValue hamiltonian(const Lagrangian& L, const FieldSet& F, const VectorRef& x, const VectorRef& p) {
  return hamiltonian(L, F, x, p, Vector::Zero(static_cast<Eigen::Index>(F.count())));
}

double phi_functional(const Lagrangian& L, const FieldSet& F, const ControlPath& u, const VectorRef& x0,
                      double T, const IntegratorOptions& opts) {
  if (L.state_dim() != F.dim() || L.control_dim() != F.count()) {
    throw InvalidArgument("Lagrangian and field set dimensions differ");
  }
  const StepGrid g = step_grid(u, T, opts);
  const Trajectory traj = integrate(F, u, x0, T, opts);
  const std::size_t n = F.dim();
  const std::size_t m = F.count();
  std::vector<double> xa(n + m), xb(n + m);
  double acc = 0.0;
  for (std::size_t k = 0; k < g.steps; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      xa[j] = traj.states(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
      xb[j] = traj.states(static_cast<Eigen::Index>(k + 1), static_cast<Eigen::Index>(j));
    }
    if (g.aligned) {
      const std::size_t cell = k / opts.substeps;
      const double S = static_cast<double>(opts.substeps);
      const double j = static_cast<double>(k % opts.substeps);
      u.sample_cell(cell, j / S, xa.data() + n);
      u.sample_cell(cell, (j + 1) / S, xb.data() + n);
    } else {
      u.sample_right(g.time(k), xa.data() + n);
      u.sample_left(g.time(k + 1), xb.data() + n);
    }
    acc += 0.5 * g.h * (L.eval_packed(xa.data()) + L.eval_packed(xb.data()));
  }
  if (!std::isfinite(acc)) throw NonFiniteError("cost functional is non-finite");
  return acc;
}

GrowthProfile parse_growth_profile(std::string_view theta, std::string_view psi, std::string_view phi) {
  const SymbolTable r = SymbolTable::single("r");
  return {parse_expression(theta, r), parse_expression(psi, r), parse_expression(phi, r)};
}

GrowthReport growth_spot_check(const Lagrangian& L, const GrowthProfile& profile, const SampleBox& box,
                               std::size_t samples, std::uint64_t seed) {
  const std::size_t n = L.state_dim();
  const std::size_t m = L.control_dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dx(-box.x_radius, box.x_radius);
  std::uniform_real_distribution<double> du(-box.u_radius, box.u_radius);
  auto at = [](const Expr& e, double r) { return e.evaluate({&r, 1}); };

  GrowthReport rep{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                   std::numeric_limits<double>::infinity(), Vector::Zero(n), Vector::Zero(m), samples, 0, true};
  Vector x(n), u(m);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t j = 0; j < n; ++j) x[static_cast<Eigen::Index>(j)] = dx(rng);
    for (std::size_t i = 0; i < m; ++i) u[static_cast<Eigen::Index>(i)] = du(rng);
    const double Lv = L.eval(x, u);
    const double th = at(profile.theta, u.norm());
    const double ps = at(profile.psi, x.norm());
    const double lower = Lv - (th - ps);
    const double slack = 1e-9 * (1.0 + std::abs(Lv) + std::abs(th) + std::abs(ps));
    bool bad = lower < -slack;
    if (lower < rep.lower_margin) {
      rep.lower_margin = lower;
      rep.worst_lower_x = x;
      rep.worst_lower_u = u;
    }
    if (L.smooth()) {
      const double bound = at(profile.phi, x.norm()) * (u.squaredNorm() + 1.0);
      const double grad = L.d_x(x, u).norm();
      const double margin = bound - grad;
      rep.gradient_margin = std::min(rep.gradient_margin, margin);
      bad = bad || margin < -1e-9 * (1.0 + bound + grad);
    }
    for (double r : {u.norm(), x.norm()}) {
      rep.profile_min = std::min({rep.profile_min, at(profile.theta, r), at(profile.psi, r), at(profile.phi, r)});
    }
    if (bad) ++rep.violations;
  }
  if (rep.profile_min < 0.0) ++rep.violations;
  rep.ok = rep.violations == 0;
  return rep;
}

}  // namespace affext
