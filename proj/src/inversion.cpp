#include "affext/inversion.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <random>

#include "affext/errors.hpp"

namespace affext {

namespace {

const SymbolTable& time_symbols() {
  static const SymbolTable s = SymbolTable::single("s");
  return s;
}

}  // namespace

Vector Direction::eval(double s) const {
  Vector v(static_cast<Eigen::Index>(components.size()));
  const double arg[1] = {s};
  for (std::size_t i = 0; i < components.size(); ++i) v[static_cast<Eigen::Index>(i)] = components[i].evaluate(arg);
  return v;
}

ControlPath Direction::sample(double T, std::size_t N) const {
  return ControlPath::from_function(T, N, components.size(), [this](double s) { return eval(s); });
}

std::string Direction::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (i) out += ", ";
    out += components[i].to_string(time_symbols());
  }
  return out;
}

Dictionary::Dictionary(std::vector<Direction> directions) : dirs_(std::move(directions)) {
  if (!dirs_.empty()) {
    const std::size_t m = dirs_.front().components.size();
    for (const Direction& d : dirs_) {
      if (d.components.size() != m) throw InvalidArgument("dictionary directions have mixed channel counts");
    }
  }
}

Dictionary Dictionary::constants(std::size_t m) {
  std::vector<Direction> dirs;
  for (std::size_t i = 0; i < m; ++i) {
    Direction d;
    d.components.assign(m, Expr(0.0));
    d.components[i] = Expr(1.0);
    d.label = "const" + std::to_string(i + 1);
    dirs.push_back(std::move(d));
  }
  return Dictionary(std::move(dirs));
}

Dictionary Dictionary::standard(std::size_t m, double T, std::size_t k_max) {
  if (!(T > 0.0)) throw InvalidArgument("dictionary horizon must be positive");
  std::vector<Direction> dirs = constants(m).directions();
  const Expr s = Expr::variable(0);
  for (std::size_t k = 1; k <= k_max; ++k) {
    const double w = static_cast<double>(k) * M_PI / T;
    for (std::size_t i = 0; i < m; ++i) {
      for (int c = 0; c < 2; ++c) {
        Direction d;
        d.components.assign(m, Expr(0.0));
        d.components[i] = c == 0 ? sin(Expr(w) * s) : cos(Expr(w) * s);
        d.lipschitz = w;
        d.label = std::string(c == 0 ? "sin" : "cos") + std::to_string(k) + "_" + std::to_string(i + 1);
        dirs.push_back(std::move(d));
      }
    }
  }
  return Dictionary(std::move(dirs));
}

Direction parse_direction(std::string_view text, std::size_t m, double T) {
  if (!(T > 0.0)) throw InvalidArgument("direction horizon must be positive");
  Direction d;
  d.components = parse_expression_list(text, time_symbols());
  if (d.components.size() != m) {
    throw ParseError(ParseError::Kind::Structure, 0,
                     "direction has " + std::to_string(d.components.size()) + " components, expected " +
                         std::to_string(m));
  }
  std::vector<Expr> deriv;
  for (const Expr& e : d.components) deriv.push_back(e.derivative(0));
  constexpr int kSamples = 4096;
  double lip = 0.0;
  for (int q = 0; q <= kSamples; ++q) {
    const double arg[1] = {T * q / kSamples};
    double sq = 0.0;
    for (const Expr& e : deriv) {
      const double v = e.evaluate(arg);
      sq += v * v;
    }
    lip = std::max(lip, std::sqrt(sq));
  }
  if (!std::isfinite(lip)) throw NonFiniteError("direction derivative is not finite on [0, T]");
  d.lipschitz = lip * (1.0 + 1e-3);
  d.label = d.to_string();
  return d;
}

BasisSelection select_basis(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double t,
                            const Dictionary& dict, const IntegratorOptions& opts) {
  const std::size_t n = F.dim();
  if (dict.size() == 0) throw BasisDeficiencyError("empty dictionary");
  if (dict[0].components.size() != F.count()) throw InvalidArgument("dictionary channel count differs from m");
  const Linearization lin(F, u, x0, t, opts);
  std::vector<Vector> images, resid;
  double scale = 0.0;
  for (const Direction& d : dict.directions()) {
    images.push_back(lin.apply(d.sample(u.horizon(), u.intervals())));
    scale = std::max(scale, images.back().norm());
  }
  resid = images;
  std::vector<bool> used(dict.size(), false);
  BasisSelection out;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t best = dict.size();
    double best_norm = 0.0;
    for (std::size_t j = 0; j < dict.size(); ++j) {
      if (used[j]) continue;
      const double r = resid[j].norm();
      if (r > best_norm) {
        best_norm = r;
        best = j;
      }
    }
    if (best == dict.size() || best_norm <= 1e-9 * scale) {
      throw BasisDeficiencyError("dictionary images span rank " + std::to_string(step) + " < " + std::to_string(n));
    }
    used[best] = true;
    out.indices.push_back(best);
    const Vector q = resid[best] / best_norm;
    for (std::size_t j = 0; j < dict.size(); ++j) {
      if (!used[j]) resid[j] -= q.dot(resid[j]) * q;
    }
  }
  out.phi.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) out.phi.col(static_cast<Eigen::Index>(k)) = images[out.indices[k]];
  out.det = out.phi.determinant();
  return out;
}

bool InversionChart::contains(double s, const VectorRef& beta) const {
  const double slack = r * (1.0 + 1e-12);
  return std::abs(s - t) <= slack && (beta - beta0).norm() <= slack;
}

namespace {

ControlPath combine(const InversionChart& c, const Vector& alpha) {
  ControlPath out = c.anchor;
  for (std::size_t i = 0; i < c.directions.size(); ++i) {
    const double a = alpha[static_cast<Eigen::Index>(i)];
    if (a != 0.0) out += a * c.directions[i];
  }
  return out;
}

// dE_s at `control` applied to the chart directions, n x n.
Matrix chart_jacobian(const InversionChart& c, const Linearization& lin) {
  const auto n = static_cast<Eigen::Index>(c.directions.size());
  Matrix J(n, n);
  for (Eigen::Index k = 0; k < n; ++k) J.col(k) = lin.apply(c.directions[static_cast<std::size_t>(k)]);
  return J;
}

struct AlphaSolve {
  Vector alpha;
  ControlPath control;
  Matrix J;
  Vector velocity;  // d/ds of the endpoint map at s
  double residual;
  std::size_t iterations;
};

AlphaSolve solve_alpha(const InversionChart& c, double s, const Vector& beta, const Vector* warm) {
  const ChartOptions& o = c.options;
  const auto n = static_cast<Eigen::Index>(c.directions.size());
  Vector alpha = Vector::Zero(n);
  double res = (endpoint(c.fields, c.anchor, c.x0, s, o.integrator) - beta).norm();
  if (warm && warm->size() == n) {
    const double rw = (endpoint(c.fields, combine(c, *warm), c.x0, s, o.integrator) - beta).norm();
    if (rw < res) {
      alpha = *warm;
      res = rw;
    }
  }
  for (std::size_t it = 0;; ++it) {
    ControlPath control = combine(c, alpha);
    const Linearization lin(c.fields, control, c.x0, s, o.integrator);
    const Vector gap = lin.trajectory().final_state() - beta;
    res = gap.norm();
    if (!std::isfinite(res)) throw ChartError("chart Newton produced a non-finite endpoint");
    Matrix J = chart_jacobian(c, lin);
    if (res < o.newton_tol) {
      Vector vel(static_cast<Eigen::Index>(c.fields.dim()));
      const Vector xs = lin.trajectory().final_state();
      Vector us(static_cast<Eigen::Index>(control.channels()));
      control.sample_left(s, us.data());
      c.fields.velocity(xs.data(), us.data(), vel.data());
      return {alpha, std::move(control), std::move(J), std::move(vel), res, it};
    }
    if (it == o.newton_max_iter) {
      throw ChartError("chart Newton did not converge in " + std::to_string(o.newton_max_iter) +
                       " iterations (residual " + std::to_string(res) + ")");
    }
    const Eigen::FullPivLU<Matrix> lu(J);
    if (!lu.isInvertible()) throw ChartError("chart Jacobian became singular");
    const Vector step = lu.solve(-gap);
    double tstep = 1.0;
    bool accepted = false;
    for (int b = 0; b <= 30; ++b, tstep *= 0.5) {
      const Vector trial = alpha + tstep * step;
      const double r = (endpoint(c.fields, combine(c, trial), c.x0, s, o.integrator) - beta).norm();
      if (r < res) {
        alpha = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) throw ChartError("chart Newton stalled at residual " + std::to_string(res));
  }
}

// d alpha / d(s, beta) = J^{-1} [-dE/ds, I].
Matrix alpha_jacobian(const AlphaSolve& a) {
  const auto n = a.J.rows();
  Matrix rhs(n, n + 1);
  rhs.col(0) = -a.velocity;
  rhs.rightCols(n) = Matrix::Identity(n, n);
  return a.J.fullPivLu().solve(rhs);
}

std::vector<std::pair<double, Vector>> probe_set(double t, const Vector& beta0, double r) {
  std::vector<std::pair<double, Vector>> out;
  const auto n = beta0.size();
  for (double ds : {0.0, -r, r}) {
    out.emplace_back(t + ds, beta0);
    for (Eigen::Index k = 0; k < n; ++k) {
      for (double sign : {1.0, -1.0}) {
        Vector b = beta0;
        b[k] += sign * r;
        out.emplace_back(t + ds, b);
      }
    }
  }
  return out;
}

void setup(InversionChart& c, const FieldSet& F, const ControlPath& u, const VectorRef& x0, double t,
           const Dictionary& dict, const ChartOptions& opts) {
  if (!(t > 0.0)) throw InvalidArgument("chart anchor time must be positive");
  if (!(opts.det_tol > 0.0 && opts.det_tol < 1.0)) throw InvalidArgument("det_tol must lie in (0, 1)");
  c.x0 = x0;
  c.t = t;
  c.anchor = u;
  c.dictionary = dict;
  c.options = opts;
  c.beta0 = endpoint(F, u, x0, t, opts.integrator);
  c.basis = select_basis(F, u, x0, t, dict, opts.integrator);
  c.directions.clear();
  for (std::size_t idx : c.basis.indices) c.directions.push_back(dict[idx].sample(u.horizon(), u.intervals()));
  c.det_anchor = std::abs(c.basis.det);
  c.det_floor = opts.det_tol * c.det_anchor;
}

double declared_k(const InversionChart& c) {
  double k = c.anchor.lipschitz();
  for (std::size_t i = 0; i < c.basis.indices.size(); ++i) {
    k += c.alpha_bound[static_cast<Eigen::Index>(i)] * c.dictionary[c.basis.indices[i]].lipschitz;
  }
  return k;
}

}  // namespace

InversionChart build_chart(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double t,
                           const Dictionary& dict, const ChartOptions& opts) {
  InversionChart c{F, Vector(), 0.0, u, Vector(), Dictionary(), {}, {}, 0.0, 0.0, 0.0, Vector(), {}, 0, opts};
  double r = opts.r_init;
  if (!std::isnan(r) && !(r > 0.0)) throw InvalidArgument("chart radius must be positive");
  setup(c, F, u, x0, t, dict, opts);
  if (std::isnan(r)) r = 0.1 * (1.0 + c.beta0.norm());
  // Probes at s = t - r need a positive horizon.
  r = std::min(r, 0.5 * t);
  const auto n = static_cast<Eigen::Index>(F.dim());

  for (std::size_t halving = 0;; ++halving, r *= 0.5) {
    if (r < opts.r_min || halving > opts.max_halvings) {
      throw ChartError("no certified chart radius above " + std::to_string(opts.r_min));
    }
    bool ok = true;
    Vector amax = Vector::Zero(n);
    Vector prev;
    for (const auto& [s, beta] : probe_set(t, c.beta0, r)) {
      try {
        const AlphaSolve a = solve_alpha(c, s, beta, prev.size() ? &prev : nullptr);
        if (std::abs(a.J.determinant()) < c.det_floor) {
          ok = false;
          break;
        }
        amax = amax.cwiseMax(a.alpha.cwiseAbs());
        prev = a.alpha;
      } catch (const ChartError&) {
        ok = false;
        break;
      } catch (const DivergenceError&) {
        ok = false;
        break;
      } catch (const NonFiniteError&) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;

    c.r = r;
    c.halvings = halving;
    // Linear bound on |alpha_i| over the product of balls from the anchor
    // derivative, combined with the probe maxima, plus a safety factor.
    const AlphaSolve center = solve_alpha(c, t, c.beta0, nullptr);
    const Matrix Ja = alpha_jacobian(center);
    c.alpha_bound.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lin = r * (std::abs(Ja(i, 0)) + Ja.row(i).tail(n).norm());
      c.alpha_bound[i] = 1.5 * std::max(lin, amax[i]);
    }
    c.lipschitz.k = declared_k(c);
    const ChartLipschitzEstimate est = chart_lipschitz_estimate(c, 2 * static_cast<std::size_t>(n) + 2, opts.probe_seed);
    c.lipschitz.k_hat = est.k_hat;
    c.lipschitz.ell_hat = est.ell_hat;
    return c;
  }
}

InversionChart assemble_chart(const FieldSet& F, const ControlPath& u, const VectorRef& x0, double t,
                              const Dictionary& dict, const std::vector<std::size_t>& indices, double r,
                              const Vector& alpha_bound, const ChartLipschitz& lip, const ChartOptions& opts) {
  InversionChart c{F, Vector(), 0.0, u, Vector(), Dictionary(), {}, {}, 0.0, 0.0, 0.0, Vector(), {}, 0, opts};
  setup(c, F, u, x0, t, dict, opts);
  if (indices != c.basis.indices) throw ChartError("serialized basis does not match the recomputed selection");
  if (!(r > 0.0)) throw InvalidArgument("chart radius must be positive");
  if (alpha_bound.size() != static_cast<Eigen::Index>(F.dim())) throw InvalidArgument("alpha bound has wrong size");
  c.r = r;
  c.alpha_bound = alpha_bound;
  c.lipschitz = lip;
  return c;
}

bool within_declared_lipschitz(const InversionChart& chart, const ControlPath& v) {
  return v.lipschitz() <= chart.lipschitz.k * (1.0 + 1e-9) + 1e-12;
}

ControlPath chart_eval(const InversionChart& chart, double s, const VectorRef& beta, ChartEvalInfo* info,
                       const Vector* warm) {
  if (static_cast<std::size_t>(beta.size()) != chart.fields.dim()) throw InvalidArgument("beta has wrong dimension");
  if (!chart.contains(s, beta)) throw InvalidArgument("(s, beta) lies outside the chart domain");
  const AlphaSolve a = solve_alpha(chart, s, beta, warm);
  if (!within_declared_lipschitz(chart, a.control)) {
    throw ChartError("emitted control has Lipschitz constant " + std::to_string(a.control.lipschitz()) +
                     " above the declared " +
                     std::to_string(chart.lipschitz.k));
  }
  if (info) {
    info->alpha = a.alpha;
    info->residual = a.residual;
    info->det = a.J.determinant();
    info->iterations = a.iterations;
  }
  return a.control;
}

namespace {

Vector point_of(double s, const Vector& beta) {
  Vector p(beta.size() + 1);
  p << s, beta;
  return p;
}

}  // namespace

ChartLipschitzEstimate chart_lipschitz_estimate(const InversionChart& chart,
                                                const std::vector<std::pair<Vector, Vector>>& pairs) {
  ChartLipschitzEstimate est;
  const auto n = static_cast<Eigen::Index>(chart.directions.size());
  Matrix gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      gram(i, j) = gram(j, i) = inner_product(chart.directions[static_cast<std::size_t>(i)],
                                              chart.directions[static_cast<std::size_t>(j)]);
    }
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Matrix half = eig.operatorSqrt();

  for (const auto& [p, q] : pairs) {
    const double dist = (p - q).norm();
    if (dist < 1e-12) {
      ++est.skipped;
      continue;
    }
    const AlphaSolve a = solve_alpha(chart, p[0], p.tail(p.size() - 1), nullptr);
    const AlphaSolve b = solve_alpha(chart, q[0], q.tail(q.size() - 1), &a.alpha);
    est.max_time_lipschitz = std::max({est.max_time_lipschitz, a.control.lipschitz(), b.control.lipschitz()});
    est.k_hat = std::max(est.k_hat, (a.control - b.control).sup_norm() / dist);
    const Matrix dJ = half * (alpha_jacobian(a) - alpha_jacobian(b));
    const double op = dJ.jacobiSvd().singularValues()[0];
    est.ell_hat = std::max(est.ell_hat, op / dist);
    ++est.pairs;
  }
  return est;
}

ChartLipschitzEstimate chart_lipschitz_estimate(const InversionChart& chart, std::size_t probes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const auto n = chart.beta0.size();
  const double rr = 0.999 * chart.r;
  auto draw = [&]() {
    const double s = chart.t + rr * unit(rng);
    Vector dir(n);
    for (Eigen::Index i = 0; i < n; ++i) dir[i] = g(rng);
    const double len = rr * std::pow(0.5 * (unit(rng) + 1.0), 1.0 / static_cast<double>(n));
    const double nd = dir.norm();
    return point_of(s, chart.beta0 + (nd > 0.0 ? Vector((len / nd) * dir) : Vector(Vector::Zero(n))));
  };
  std::vector<std::pair<Vector, Vector>> pairs;
  for (std::size_t i = 0; i < probes; ++i) {
    Vector p = draw();
    Vector q = draw();
    pairs.emplace_back(std::move(p), std::move(q));
  }
  return chart_lipschitz_estimate(chart, pairs);
}

}  // namespace affext
