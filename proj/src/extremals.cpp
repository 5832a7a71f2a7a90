#include "affext/extremals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "affext/errors.hpp"

namespace affext {

namespace {

using Index = Eigen::Index;

void require_compatible(const FieldSet& F, const Lagrangian& L) {
  if (L.state_dim() != F.dim() || L.control_dim() != F.count()) {
    throw InvalidArgument("Lagrangian and field set dimensions differ");
  }
  if (!L.smooth()) throw NonSmoothError("extremal computations need a C2 Lagrangian (no abs)");
}

// Right-hand side of the Hamiltonian system with feedback w = w(x, Z(x,p)).
class FlowRhs {
public:
  FlowRhs(const FieldSet& F, const Lagrangian& L, const LegendreOptions& lo)
      : F_(F), L_(L), legendre_(L, lo), n_(F.dim()), m_(F.count()), B_(n_, m_), A_(n_, n_), Z_(m_),
        du_(m_), xu_(n_ + m_) {}

  // Fills xdot, pdot and updates `w` in place (used as the warm start).
  void operator()(const Vector& x, const Vector& p, Vector& w, Vector& xdot, Vector& pdot) {
    momentum(x, p);
    legendre_.solve(x.data(), Z_.data(), w.data());
    xdot.noalias() = B_ * w;
    F_.combined_jacobian(x.data(), w.data(), A_.data());
    pack(x, w);
    L_.d_x_packed(xu_.data(), pdot.data());
    pdot.noalias() -= A_.transpose() * p;
  }

  double hamiltonian(const Vector& x, const Vector& p, const Vector& w) {
    momentum(x, p);
    pack(x, w);
    return w.dot(Z_) - L_.eval_packed(xu_.data());
  }

  double stationarity(const Vector& x, const Vector& p, const Vector& w) {
    momentum(x, p);
    pack(x, w);
    L_.d_u_packed(xu_.data(), du_.data());
    return (du_ - Z_).norm();
  }

  void feedback(const Vector& x, const Vector& p, Vector& w) {
    momentum(x, p);
    legendre_.solve(x.data(), Z_.data(), w.data());
  }

private:
  void momentum(const Vector& x, const Vector& p) {
    F_.frame_into(x.data(), B_.data());
    Z_.noalias() = B_.transpose() * p;
  }
  void pack(const Vector& x, const Vector& w) {
    std::copy(x.data(), x.data() + n_, xu_.begin());
    std::copy(w.data(), w.data() + m_, xu_.begin() + static_cast<std::ptrdiff_t>(n_));
  }

  const FieldSet& F_;
  const Lagrangian& L_;
  LegendreSolver legendre_;
  std::size_t n_, m_;
  Matrix B_, A_;
  Vector Z_, du_;
  std::vector<double> xu_;
};

}  // namespace

HamiltonianFlow hamiltonian_flow(const FieldSet& F, const Lagrangian& L, const VectorRef& x0, const VectorRef& p0,
                                 double T, const ShootOptions& opts) {
  require_compatible(F, L);
  const std::size_t n = F.dim();
  const std::size_t m = F.count();
  if (static_cast<std::size_t>(x0.size()) != n || static_cast<std::size_t>(p0.size()) != n) {
    throw InvalidArgument("x0 and p0 must have dimension n");
  }
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("horizon must be positive and finite");
  if (opts.grid == 0 || opts.integrator.substeps == 0) throw InvalidArgument("grid and substeps must be positive");
  const std::size_t M = opts.grid * opts.integrator.substeps;
  const double h = T / static_cast<double>(M);

  HamiltonianFlow out;
  out.times.resize(M + 1);
  out.xi.resize(static_cast<Eigen::Index>(M + 1), static_cast<Eigen::Index>(n));
  out.p.resize(static_cast<Eigen::Index>(M + 1), static_cast<Eigen::Index>(n));
  out.w.resize(static_cast<Eigen::Index>(M + 1), static_cast<Eigen::Index>(m));
  out.H.resize(M + 1);

  FlowRhs rhs(F, L, opts.legendre);
  Vector x = x0, p = p0, w = Vector::Zero(static_cast<Eigen::Index>(m));
  Vector wm(m), xs(n), ps(n), kx1(n), kx2(n), kx3(n), kx4(n), kp1(n), kp2(n), kp3(n), kp4(n);
  auto record = [&](std::size_t k, const Vector& wk) {
    out.times[k] = T * static_cast<double>(k) / static_cast<double>(M);
    out.xi.row(static_cast<Eigen::Index>(k)) = x.transpose();
    out.p.row(static_cast<Eigen::Index>(k)) = p.transpose();
    out.w.row(static_cast<Eigen::Index>(k)) = wk.transpose();
    out.H[k] = rhs.hamiltonian(x, p, wk);
  };
  auto guard = [&](double s) {
    const double nx = x.norm(), np = p.norm();
    if (!std::isfinite(nx) || !std::isfinite(np) || nx > opts.integrator.blowup || np > opts.integrator.blowup) {
      throw DivergenceError("Hamiltonian flow exceeded blow-up guard at s = " + std::to_string(s));
    }
  };

  guard(0.0);
  for (std::size_t k = 0; k < M; ++k) {
    rhs(x, p, w, kx1, kp1);
    if (k == 0) record(0, w);
    wm = w;
    xs = x + 0.5 * h * kx1;
    ps = p + 0.5 * h * kp1;
    rhs(xs, ps, wm, kx2, kp2);
    xs = x + 0.5 * h * kx2;
    ps = p + 0.5 * h * kp2;
    rhs(xs, ps, wm, kx3, kp3);
    xs = x + h * kx3;
    ps = p + h * kp3;
    rhs(xs, ps, wm, kx4, kp4);
    x += h / 6.0 * (kx1 + 2.0 * kx2 + 2.0 * kx3 + kx4);
    p += h / 6.0 * (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4);
    guard(h * static_cast<double>(k + 1));
    w = wm;
    rhs.feedback(x, p, w);
    record(k + 1, w);
  }
  return out;
}

namespace {

struct FlowSummary {
  HamiltonianFlow flow;
  Vector gap;
};

FlowSummary run_flow(const FieldSet& F, const Lagrangian& L, const VectorRef& x0, const VectorRef& target, double T,
                     const Vector& p0, const ShootOptions& opts) {
  FlowSummary s{hamiltonian_flow(F, L, x0, p0, T, opts), Vector()};
  s.gap = s.flow.xi.row(s.flow.xi.rows() - 1).transpose() - target;
  return s;
}

// Residual norm for a trial point; failures count as +inf so backtracking retreats.
double trial_residual(const FieldSet& F, const Lagrangian& L, const VectorRef& x0, const VectorRef& target, double T,
                      const Vector& p0, const ShootOptions& opts, FlowSummary* keep) {
  try {
    FlowSummary s = run_flow(F, L, x0, target, T, p0, opts);
    const double r = s.gap.norm();
    if (keep) *keep = std::move(s);
    return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
  } catch (const DivergenceError&) {
    return std::numeric_limits<double>::infinity();
  } catch (const DiffeomorphismError&) {
    return std::numeric_limits<double>::infinity();
  } catch (const NonFiniteError&) {
    return std::numeric_limits<double>::infinity();
  }
}

ExtremalSolution package(const FieldSet& F, const Lagrangian& L, const Vector& p0, double T, FlowSummary&& s,
                         const ShootOptions& opts, std::size_t iterations) {
  const std::size_t n = F.dim();
  const std::size_t m = F.count();
  const std::size_t S = opts.integrator.substeps;
  const std::size_t N = opts.grid;
  HamiltonianFlow& fl = s.flow;
  const std::size_t M = fl.times.size() - 1;

  Matrix nodes(static_cast<Eigen::Index>(N + 1), static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k <= N; ++k) nodes.row(static_cast<Eigen::Index>(k)) = fl.w.row(static_cast<Eigen::Index>(k * S));

  ExtremalSolution sol{ControlPath(T, std::move(nodes)), Trajectory{}, fl.p, p0, Vector(), 0.0, fl.H[0], {}, iterations};
  sol.xi.times = fl.times;
  sol.xi.states = fl.xi;
  sol.xi.x0 = fl.xi.row(0).transpose();
  sol.lambda = fl.p.row(static_cast<Eigen::Index>(M)).transpose();

  FlowRhs rhs(F, L, opts.legendre);
  const double h = T / static_cast<double>(M);
  std::vector<double> xu(n + m);
  double phi = 0.0, prev = 0.0, stat = 0.0, drift = 0.0;
  for (std::size_t k = 0; k <= M; ++k) {
    const Vector x = fl.xi.row(static_cast<Eigen::Index>(k)).transpose();
    const Vector p = fl.p.row(static_cast<Eigen::Index>(k)).transpose();
    const Vector w = fl.w.row(static_cast<Eigen::Index>(k)).transpose();
    std::copy(x.data(), x.data() + n, xu.begin());
    std::copy(w.data(), w.data() + m, xu.begin() + static_cast<std::ptrdiff_t>(n));
    const double Lk = L.eval_packed(xu.data());
    if (k > 0) phi += 0.5 * h * (prev + Lk);
    prev = Lk;
    stat = std::max(stat, rhs.stationarity(x, p, w));
    drift = std::max(drift, std::abs(fl.H[k] - fl.H[0]));
  }
  sol.phi = phi;
  sol.residuals.endpoint_gap = s.gap.norm();
  sol.residuals.stationarity = stat;
  sol.residuals.hamiltonian_drift = drift / (1.0 + std::abs(fl.H[0]));
  return sol;
}

}  // namespace

namespace {

ExtremalSolution newton_shoot(const FieldSet& F, const Lagrangian& L, const VectorRef& x0, const VectorRef& target,
                              double T, const VectorRef& p0_guess, const ShootOptions& opts) {
  const std::size_t n = F.dim();

  Vector p0 = p0_guess;
  FlowSummary cur = run_flow(F, L, x0, target, T, p0, opts);
  double res = cur.gap.norm();
  if (!std::isfinite(res)) throw NonFiniteError("shooting residual is non-finite at the initial guess");
  Matrix J(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    if (res < opts.tol) return package(F, L, p0, T, std::move(cur), opts, it);
    const double delta = opts.fd_step * (1.0 + p0.norm());
    for (std::size_t j = 0; j < n; ++j) {
      Vector pp = p0, pm = p0;
      pp[static_cast<Eigen::Index>(j)] += delta;
      pm[static_cast<Eigen::Index>(j)] -= delta;
      const Vector ep = run_flow(F, L, x0, target, T, pp, opts).gap;
      const Vector em = run_flow(F, L, x0, target, T, pm, opts).gap;
      J.col(static_cast<Eigen::Index>(j)) = (ep - em) / (2.0 * delta);
    }
    // Least-squares steps with minimum norm: symmetries of the system can make J
    // singular, and near a manifold of solutions the smallest singular value
    // tends to zero. When the full step fails, full steps at lower truncation
    // ranks are tried before backtracking.
    Eigen::JacobiSVD<Matrix> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    const Vector rhs_u = svd.matrixU().transpose() * (-cur.gap);
    const double smax = sv.size() > 0 ? sv[0] : 0.0;
    Index kept = 0;
    while (kept < sv.size() && sv[kept] > opts.rcond * smax && sv[kept] > 0.0) ++kept;
    if (kept == 0) break;
    auto truncated = [&](Index r) {
      Vector c = Vector::Zero(sv.size());
      for (Index i = 0; i < r; ++i) c[i] = rhs_u[i] / sv[i];
      return Vector(svd.matrixV() * c);
    };
    const Vector step = truncated(kept);
    if (!step.allFinite()) break;

    bool accepted = false;
    {
      double best = res;
      Vector best_p;
      FlowSummary best_s;
      for (Index r = kept; r >= 1 && best >= res; --r) {
        const Vector trial = p0 + (r == kept ? step : truncated(r));
        FlowSummary next;
        const double q = trial_residual(F, L, x0, target, T, trial, opts, &next);
        if (q < best) {
          best = q;
          best_p = trial;
          best_s = std::move(next);
        }
      }
      if (best < res) {
        p0 = std::move(best_p);
        cur = std::move(best_s);
        res = best;
        accepted = true;
      }
    }
    double t = 0.5;
    for (std::size_t b = 1; !accepted && b <= opts.max_backtracks; ++b, t *= 0.5) {
      const Vector trial = p0 + t * step;
      FlowSummary next;
      const double r = trial_residual(F, L, x0, target, T, trial, opts, &next);
      if (r < res) {
        p0 = trial;
        cur = std::move(next);
        res = r;
        accepted = true;
      }
    }
    // Fallback when the Gauss-Newton direction fails: Levenberg-Marquardt
    // damping toward the residual gradient, still on |xi(T) - x| only.
    if (!accepted) {
      const Matrix JtJ = J.transpose() * J;
      const Vector grad = J.transpose() * cur.gap;
      double mu = 1e-3 * std::max(JtJ.diagonal().maxCoeff(), 1e-12);
      for (std::size_t b = 0; b < 12 && !accepted; ++b, mu *= 10.0) {
        const Matrix damped = JtJ + mu * Matrix::Identity(JtJ.rows(), JtJ.cols());
        const Vector trial = p0 - damped.ldlt().solve(grad);
        FlowSummary next;
        const double r = trial_residual(F, L, x0, target, T, trial, opts, &next);
        if (r < res) {
          p0 = trial;
          cur = std::move(next);
          res = r;
          accepted = true;
        }
      }
    }
    if (!accepted) {
      throw ConvergenceError("shooting stalled: no step reduced the endpoint residual", res);
    }
  }
  if (res < opts.tol) return package(F, L, p0, T, std::move(cur), opts, opts.max_iter);
  throw ConvergenceError("shooting did not converge in " + std::to_string(opts.max_iter) + " iterations", res);
}

}  // namespace

ExtremalSolution shoot_extremal(const FieldSet& F, const Lagrangian& L, const VectorRef& x0, const VectorRef& target,
                                double T, const VectorRef& p0_guess, const ShootOptions& opts) {
  require_compatible(F, L);
  if (static_cast<std::size_t>(target.size()) != F.dim()) throw InvalidArgument("target has wrong dimension");
  ShootOptions o = opts;
  ExtremalSolution sol = newton_shoot(F, L, x0, target, T, p0_guess, o);
  // Refine the flow until the Hamiltonian is conserved to drift_tol.
  while (sol.residuals.hamiltonian_drift > opts.drift_tol) {
    if (o.integrator.substeps * 2 > opts.max_substeps) {
      throw ConvergenceError("Hamiltonian drift " + std::to_string(sol.residuals.hamiltonian_drift) +
                                 " exceeds tolerance at " + std::to_string(o.integrator.substeps) + " substeps",
                             sol.residuals.hamiltonian_drift);
    }
    o.integrator.substeps *= 2;
    const std::size_t prior = sol.iterations;
    sol = newton_shoot(F, L, x0, target, T, sol.p0, o);
    sol.iterations += prior;
  }
  return sol;
}

MultiStartResult multi_start(const FieldSet& F, const Lagrangian& L, const VectorRef& x0, const VectorRef& target,
                             double T, const std::vector<Vector>& seeds, const ShootOptions& opts, double dedup_tol) {
  MultiStartResult out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    try {
      ExtremalSolution sol = shoot_extremal(F, L, x0, target, T, seeds[i], opts);
      ++out.converged;
      auto dup = std::find_if(out.solutions.begin(), out.solutions.end(), [&](const ExtremalSolution& s) {
        return l2_distance(s.u, sol.u) < dedup_tol;
      });
      if (dup == out.solutions.end()) {
        out.solutions.push_back(std::move(sol));
      } else if (sol.lambda.norm() < dup->lambda.norm()) {
        *dup = std::move(sol);
      }
    } catch (const ConvergenceError& e) {
      out.failures.push_back({i, e.what(), e.best_residual()});
    } catch (const DivergenceError& e) {
      out.failures.push_back({i, e.what(), std::numeric_limits<double>::infinity()});
    } catch (const DiffeomorphismError& e) {
      out.failures.push_back({i, e.what(), std::numeric_limits<double>::infinity()});
    } catch (const NonFiniteError& e) {
      out.failures.push_back({i, e.what(), std::numeric_limits<double>::infinity()});
    }
  }
  std::stable_sort(out.solutions.begin(), out.solutions.end(), [](const ExtremalSolution& a, const ExtremalSolution& b) {
    if (a.phi != b.phi) return a.phi < b.phi;
    return a.lambda.norm() < b.lambda.norm();
  });
  return out;
}

std::vector<Vector> default_seeds(std::size_t n, std::size_t count, double scale, std::uint64_t seed) {
  std::vector<Vector> out;
  if (count == 0) return out;
  out.push_back(Vector::Zero(static_cast<Eigen::Index>(n)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t i = 1; i < count; ++i) {
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = scale * g(rng);
    out.push_back(std::move(v));
  }
  return out;
}

CostatePath costate_from_lambda(const Linearization& lin, const Lagrangian& L, const VectorRef& lambda) {
  if (!L.smooth()) throw NonSmoothError("costate needs a smooth Lagrangian");
  const std::size_t n = lin.dim();
  const std::size_t m = lin.channels();
  if (static_cast<std::size_t>(lambda.size()) != n) throw InvalidArgument("multiplier has wrong dimension");
  const Trajectory& tr = lin.trajectory();
  const FundamentalSolution& fs = lin.fundamental();
  const std::size_t M = tr.steps();
  const double h = lin.grid().h;

  std::vector<double> xu(n + m);
  auto dxl = [&](std::size_t k, const Vector& u) {
    for (std::size_t j = 0; j < n; ++j) xu[j] = tr.states(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
    std::copy(u.data(), u.data() + m, xu.begin() + static_cast<std::ptrdiff_t>(n));
    Vector g(n);
    L.d_x_packed(xu.data(), g.data());
    return g;
  };

  CostatePath out{tr.times, Matrix(static_cast<Eigen::Index>(M + 1), static_cast<Eigen::Index>(n))};
  const Vector head = fs.psi[M].transpose() * lambda;
  Vector tail = Vector::Zero(static_cast<Eigen::Index>(n));
  out.p.row(static_cast<Eigen::Index>(M)) = (lin.psi_inverse(M).transpose() * head).transpose();
  for (std::size_t k = M; k-- > 0;) {
    tail += 0.5 * h * (fs.psi[k].transpose() * dxl(k, lin.control_right(k)) +
                       fs.psi[k + 1].transpose() * dxl(k + 1, lin.control_left(k + 1)));
    out.p.row(static_cast<Eigen::Index>(k)) = (lin.psi_inverse(k).transpose() * (head - tail)).transpose();
  }
  if (!out.p.allFinite()) throw NonFiniteError("costate is non-finite");
  return out;
}

CostatePath costate_from_lambda(const FieldSet& F, const Lagrangian& L, const ControlPath& u, const VectorRef& x0,
                                double T, const VectorRef& lambda, const IntegratorOptions& opts) {
  require_compatible(F, L);
  return costate_from_lambda(Linearization(F, u, x0, T, opts), L, lambda);
}

ExtremalityResidual extremality_residual(const FieldSet& F, const Lagrangian& L, const ControlPath& u,
                                         const VectorRef& x0, const VectorRef& target, double T,
                                         const VectorRef& lambda, const IntegratorOptions& opts) {
  require_compatible(F, L);
  const Linearization lin(F, u, x0, T, opts);
  const CostatePath cp = costate_from_lambda(lin, L, lambda);
  const Trajectory& tr = lin.trajectory();
  ExtremalityResidual out{(tr.final_state() - target).norm(), 0.0};
  for (std::size_t k = 0; k <= tr.steps(); ++k) {
    const Vector x = tr.state(k);
    const Vector Z = momentum(F, x, cp.p.row(static_cast<Eigen::Index>(k)).transpose());
    for (const Vector* uk : {&lin.control_right(k), &lin.control_left(k)}) {
      out.stationarity = std::max(out.stationarity, (L.d_u(x, *uk) - Z).norm());
    }
  }
  return out;
}

}  // namespace affext
