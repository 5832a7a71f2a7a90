#include "affext/dynamics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "affext/errors.hpp"

namespace affext {

StepGrid step_grid(const ControlPath& u, double T, const IntegratorOptions& opts) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("horizon must be positive and finite");
  if (opts.substeps == 0) throw InvalidArgument("substeps must be at least 1");
  const std::size_t N = u.intervals();
  if (T == u.horizon()) return {N * opts.substeps, T, T / static_cast<double>(N * opts.substeps), true};
  const double cells = std::ceil(T / u.step() - 1e-9);
  const std::size_t steps = std::max<std::size_t>(1, static_cast<std::size_t>(cells)) * opts.substeps;
  return {steps, T, T / static_cast<double>(steps), false};
}

namespace {

// Controls at the start, midpoint and end of step k.
struct StageControls {
  Vector a, mid, b;
};

void stage_controls(const ControlPath& u, const StepGrid& g, std::size_t substeps, std::size_t k,
                    StageControls& out) {
  if (g.aligned) {
    const std::size_t cell = k / substeps;
    const double j = static_cast<double>(k % substeps);
    const double S = static_cast<double>(substeps);
    u.sample_cell(cell, j / S, out.a.data());
    u.sample_cell(cell, (j + 0.5) / S, out.mid.data());
    u.sample_cell(cell, (j + 1.0) / S, out.b.data());
    return;
  }
  const double s0 = g.time(k);
  const double s1 = g.time(k + 1);
  u.sample_right(s0, out.a.data());
  u.sample_right(0.5 * (s0 + s1), out.mid.data());
  u.sample_left(s1, out.b.data());
}

void check_state(const double* x, std::size_t n, double blowup, double s) {
  double norm2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) norm2 += x[j] * x[j];
  if (!std::isfinite(norm2) || std::sqrt(norm2) > blowup) {
    throw DivergenceError("state norm exceeded blow-up guard " + std::to_string(blowup) + " at s = " +
                          std::to_string(s));
  }
}

// RK4 over the step grid. When `psi` is non-null the matrix ODE Psi' = A Psi
// is integrated alongside; psi->at(k) receives Psi at node k.
void run_rk4(const FieldSet& F, const ControlPath& u, const VectorRef& x0, const StepGrid& g,
             const IntegratorOptions& opts, Trajectory& traj, std::vector<Matrix>* psi) {
  const std::size_t n = F.dim();
  const std::size_t m = F.count();
  if (static_cast<std::size_t>(x0.size()) != n) throw InvalidArgument("x0 has wrong dimension");
  if (u.channels() != m) {
    throw InvalidArgument("control has " + std::to_string(u.channels()) + " channels, system has " +
                          std::to_string(m) + " fields");
  }
  const std::size_t M = g.steps;
  traj.times.resize(M + 1);
  traj.states.resize(static_cast<Eigen::Index>(M + 1), static_cast<Eigen::Index>(n));
  traj.x0 = x0;
  for (std::size_t k = 0; k <= M; ++k) traj.times[k] = g.time(k);

  StageControls sc{Vector(m), Vector(m), Vector(m)};
  Vector x = x0, xs(n), k1(n), k2(n), k3(n), k4(n);
  Matrix P = Matrix::Identity(n, n), Ps(n, n), A(n, n), K1(n, n), K2(n, n), K3(n, n), K4(n, n);
  const double h = g.h;
  check_state(x.data(), n, opts.blowup, 0.0);
  traj.states.row(0) = x.transpose();
  if (psi) {
    psi->assign(M + 1, Matrix());
    (*psi)[0] = P;
  }

  for (std::size_t k = 0; k < M; ++k) {
    stage_controls(u, g, opts.substeps, k, sc);
    F.velocity(x.data(), sc.a.data(), k1.data());
    if (psi) {
      F.combined_jacobian(x.data(), sc.a.data(), A.data());
      K1.noalias() = A * P;
    }
    xs = x + 0.5 * h * k1;
    F.velocity(xs.data(), sc.mid.data(), k2.data());
    if (psi) {
      F.combined_jacobian(xs.data(), sc.mid.data(), A.data());
      Ps = P + 0.5 * h * K1;
      K2.noalias() = A * Ps;
    }
    xs = x + 0.5 * h * k2;
    F.velocity(xs.data(), sc.mid.data(), k3.data());
    if (psi) {
      F.combined_jacobian(xs.data(), sc.mid.data(), A.data());
      Ps = P + 0.5 * h * K2;
      K3.noalias() = A * Ps;
    }
    xs = x + h * k3;
    F.velocity(xs.data(), sc.b.data(), k4.data());
    if (psi) {
      F.combined_jacobian(xs.data(), sc.b.data(), A.data());
      Ps = P + h * K3;
      K4.noalias() = A * Ps;
      P += h / 6.0 * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
      (*psi)[k + 1] = P;
    }
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_state(x.data(), n, opts.blowup, traj.times[k + 1]);
    traj.states.row(static_cast<Eigen::Index>(k + 1)) = x.transpose();
  }
  if (psi && !(*psi)[M].allFinite()) throw DivergenceError("fundamental solution became non-finite");
}

double condition_number(const Matrix& P) {
  Eigen::JacobiSVD<Matrix> svd(P);
  const auto& s = svd.singularValues();
  const double lo = s[s.size() - 1];
  return lo > 0.0 ? s[0] / lo : std::numeric_limits<double>::infinity();
}

FundamentalSolution finish_fundamental(const Trajectory& traj, std::vector<Matrix> psi,
                                       const IntegratorOptions& opts) {
  FundamentalSolution out;
  out.times = traj.times;
  out.psi = std::move(psi);
  out.condition.reserve(out.psi.size());
  for (const Matrix& P : out.psi) {
    const double c = condition_number(P);
    out.condition.push_back(c);
    out.max_condition = std::max(out.max_condition, c);
  }
  out.ill_conditioned = !(out.max_condition <= opts.cond_limit);
  return out;
}

}  // namespace

Trajectory integrate(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double T,
                     const IntegratorOptions& opts) {
  const StepGrid g = step_grid(u, T, opts);
  Trajectory traj;
  run_rk4(F, u, x0, g, opts, traj, nullptr);
  return traj;
}

Vector endpoint(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double T,
                const IntegratorOptions& opts) {
  return integrate(F, u, x0, T, opts).final_state();
}

FundamentalSolution fundamental_solution(const FieldSet& F, const ControlPath& u, const Trajectory& traj,
                                         const IntegratorOptions& opts) {
  if (traj.times.size() < 2) throw InvalidArgument("trajectory has no steps");
  const StepGrid g = step_grid(u, traj.times.back(), opts);
  if (g.steps != traj.steps()) throw InvalidArgument("trajectory grid does not match the control path");
  Trajectory joint;
  std::vector<Matrix> psi;
  run_rk4(F, u, traj.x0, g, opts, joint, &psi);
  const double tol = 1e-12 * (1.0 + traj.states.cwiseAbs().maxCoeff());
  if ((joint.states - traj.states).cwiseAbs().maxCoeff() > tol) {
    throw InvalidArgument("trajectory was not produced by this system and control");
  }
  return finish_fundamental(traj, std::move(psi), opts);
}

Linearization::Linearization(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double T,
                             const IntegratorOptions& opts)
    : n_(F.dim()), m_(F.count()), grid_(step_grid(u, T, opts)) {
  std::vector<Matrix> psi;
  run_rk4(F, u, x0, grid_, opts, traj_, &psi);
  fund_ = finish_fundamental(traj_, std::move(psi), opts);

  const std::size_t M = grid_.steps;
  psi_inv_.resize(M + 1);
  g_.resize(M + 1);
  u_right_.assign(M + 1, Vector(m_));
  u_left_.assign(M + 1, Vector(m_));
  StageControls sc{Vector(m_), Vector(m_), Vector(m_)};
  for (std::size_t k = 0; k < M; ++k) {
    stage_controls(u, grid_, opts.substeps, k, sc);
    u_right_[k] = sc.a;
    u_left_[k + 1] = sc.b;
  }
  u_left_[0] = u_right_[0];
  u_right_[M] = u_left_[M];

  const Matrix& psiT = fund_.psi[M];
  Matrix B(n_, m_);
  Vector x(n_);
  for (std::size_t k = 0; k <= M; ++k) {
    psi_inv_[k] = fund_.psi[k].partialPivLu().inverse();
    x = traj_.state(k);
    F.frame_into(x.data(), B.data());
    g_[k] = psiT * (psi_inv_[k] * B);
  }
}

Vector Linearization::apply(const ControlPath& v) const {
  if (v.channels() != m_) throw InvalidArgument("direction has wrong channel count");
  const std::size_t M = grid_.steps;
  Vector acc = Vector::Zero(n_);
  Vector vr(m_), vl(m_);
  for (std::size_t k = 0; k < M; ++k) {
    v.sample_right(grid_.time(k), vr.data());
    v.sample_left(grid_.time(k + 1), vl.data());
    acc += 0.5 * grid_.h * (g_[k] * vr + g_[k + 1] * vl);
  }
  return acc;
}

ControlPath Linearization::adjoint(const VectorRef& lambda) const {
  if (static_cast<std::size_t>(lambda.size()) != n_) throw InvalidArgument("multiplier has wrong dimension");
  const std::size_t M = grid_.steps;
  Matrix values(static_cast<Eigen::Index>(M + 1), static_cast<Eigen::Index>(m_));
  for (std::size_t k = 0; k <= M; ++k) values.row(static_cast<Eigen::Index>(k)) = (g_[k].transpose() * lambda).transpose();
  return ControlPath(grid_.T, std::move(values));
}

Matrix Linearization::gram() const {
  const std::size_t M = grid_.steps;
  Matrix G = Matrix::Zero(n_, n_);
  for (std::size_t k = 0; k <= M; ++k) {
    const double w = (k == 0 || k == M) ? 0.5 * grid_.h : grid_.h;
    G.noalias() += w * g_[k] * g_[k].transpose();
  }
  return 0.5 * (G + G.transpose());
}

namespace {

void require_horizon(const ControlPath& u, double T) {
  if (T != u.horizon()) throw InvalidArgument("horizon T differs from the control path horizon");
}

}  // namespace

Vector apply_dE(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double T, const ControlPath& v,
                const IntegratorOptions& opts) {
  require_horizon(u, T);
  if (v.horizon() != u.horizon() || v.intervals() != u.intervals() || v.channels() != u.channels()) {
    throw InvalidArgument("direction v is not on the grid of u");
  }
  return Linearization(F, u, x0, T, opts).apply(v);
}

ControlPath adjoint_dE(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double T,
                       const VectorRef& lambda, const IntegratorOptions& opts) {
  require_horizon(u, T);
  return Linearization(F, u, x0, T, opts).adjoint(lambda);
}

Matrix gram_matrix(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double T,
                   const IntegratorOptions& opts) {
  require_horizon(u, T);
  return Linearization(F, u, x0, T, opts).gram();
}

}  // namespace affext
