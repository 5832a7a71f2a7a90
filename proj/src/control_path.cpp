#include "affext/control_path.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "affext/errors.hpp"

namespace affext {

ControlPath::ControlPath(double T, Matrix values, Interpolation interp)
    : T_(T), values_(std::move(values)), interp_(interp) {
  if (!(T_ > 0.0) || !std::isfinite(T_)) throw InvalidArgument("control horizon must be positive and finite");
  if (values_.rows() < 2) throw InvalidArgument("control path needs N >= 1 (at least two nodes)");
  if (values_.cols() < 1) throw InvalidArgument("control path needs at least one channel");
  if (!values_.allFinite()) throw NonFiniteError("control samples must be finite");
}

ControlPath ControlPath::zero(double T, std::size_t N, std::size_t m) {
  return ControlPath(T, Matrix::Zero(static_cast<Eigen::Index>(N + 1), static_cast<Eigen::Index>(m)));
}

ControlPath ControlPath::constant(double T, std::size_t N, const VectorRef& value) {
  Matrix v(static_cast<Eigen::Index>(N + 1), value.size());
  v.rowwise() = value.transpose();
  return ControlPath(T, std::move(v));
}

ControlPath ControlPath::from_function(double T, std::size_t N, std::size_t m,
                                       const std::function<Vector(double)>& fn,
                                       Interpolation interp) {
  if (N == 0) throw InvalidArgument("control path needs N >= 1");
  Matrix v(static_cast<Eigen::Index>(N + 1), static_cast<Eigen::Index>(m));
  for (std::size_t k = 0; k <= N; ++k) {
    // Hold cells take the value at their midpoint so that symmetric jumps land on grid lines.
    const double s = interp == Interpolation::Hold && k < N
                         ? T * (static_cast<double>(k) + 0.5) / static_cast<double>(N)
                         : T * static_cast<double>(k) / static_cast<double>(N);
    const Vector val = fn(s);
    if (static_cast<std::size_t>(val.size()) != m) throw InvalidArgument("control function arity mismatch");
    v.row(static_cast<Eigen::Index>(k)) = val.transpose();
  }
  if (interp == Interpolation::Hold) v.row(static_cast<Eigen::Index>(N)) = v.row(static_cast<Eigen::Index>(N - 1));
  return ControlPath(T, std::move(v), interp);
}

void ControlPath::sample_cell(std::size_t k, double theta, double* out) const {
  const Eigen::Index m = values_.cols();
  const auto r = static_cast<Eigen::Index>(k);
  if (interp_ == Interpolation::Hold) {
    for (Eigen::Index i = 0; i < m; ++i) out[i] = values_(r, i);
    return;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    out[i] = values_(r, i) + theta * (values_(r + 1, i) - values_(r, i));
  }
}

namespace {

// Locate s in the grid, returning (cell, fraction). Exact grid hits return
// theta = 0 in the cell to the right, except at the right end.
std::pair<std::size_t, double> locate(double s, double T, std::size_t N) {
  const double pos = s / T * static_cast<double>(N);
  double cell = std::floor(pos);
  const double nearest = std::round(pos);
  if (std::abs(pos - nearest) <= 1e-12 * std::max(1.0, std::abs(pos))) cell = nearest;
  if (cell >= static_cast<double>(N)) return {N - 1, 1.0};
  if (cell < 0) return {0, 0.0};
  const auto k = static_cast<std::size_t>(cell);
  return {k, std::clamp(pos - cell, 0.0, 1.0)};
}

}  // namespace

void ControlPath::sample_right(double s, double* out) const {
  const std::size_t N = intervals();
  if (s >= T_) {
    sample_cell(N - 1, 1.0, out);
    return;
  }
  auto [k, theta] = locate(s, T_, N);
  sample_cell(k, theta, out);
}

void ControlPath::sample_left(double s, double* out) const {
  const std::size_t N = intervals();
  if (s <= 0.0) {
    sample_cell(0, 0.0, out);
    return;
  }
  auto [k, theta] = locate(s, T_, N);
  if (theta == 0.0 && k > 0) {
    sample_cell(k - 1, 1.0, out);
    return;
  }
  sample_cell(k, theta, out);
}

Vector ControlPath::operator()(double s) const {
  Vector out(values_.cols());
  sample_right(s, out.data());
  return out;
}

double ControlPath::l2_norm() const {
  const double h = step();
  double acc = 0.0;
  for (Eigen::Index k = 0; k + 1 < values_.rows(); ++k) {
    const auto a = values_.row(k);
    if (interp_ == Interpolation::Hold) {
      acc += h * a.squaredNorm();
    } else {
      const auto b = values_.row(k + 1);
      acc += h / 3.0 * (a.squaredNorm() + a.dot(b) + b.squaredNorm());
    }
  }
  return std::sqrt(acc);
}

double ControlPath::sup_norm() const {
  double out = 0.0;
  const Eigen::Index last = interp_ == Interpolation::Hold ? values_.rows() - 1 : values_.rows();
  for (Eigen::Index k = 0; k < last; ++k) out = std::max(out, values_.row(k).norm());
  return out;
}

double ControlPath::lipschitz() const {
  const double h = step();
  double out = 0.0;
  const Eigen::Index last = interp_ == Interpolation::Hold ? values_.rows() - 2 : values_.rows() - 1;
  for (Eigen::Index k = 0; k < last; ++k) out = std::max(out, (values_.row(k + 1) - values_.row(k)).norm() / h);
  return out;
}

void ControlPath::require_compatible(const ControlPath& other) const {
  if (other.T_ != T_ || other.values_.rows() != values_.rows() || other.values_.cols() != values_.cols() ||
      other.interp_ != interp_) {
    throw InvalidArgument("control paths live on different grids");
  }
}

ControlPath& ControlPath::operator+=(const ControlPath& other) {
  require_compatible(other);
  values_ += other.values_;
  return *this;
}

ControlPath& ControlPath::operator-=(const ControlPath& other) {
  require_compatible(other);
  values_ -= other.values_;
  return *this;
}

ControlPath& ControlPath::operator*=(double c) {
  values_ *= c;
  return *this;
}

ControlPath operator+(ControlPath a, const ControlPath& b) { return a += b; }
ControlPath operator-(ControlPath a, const ControlPath& b) { return a -= b; }
ControlPath operator*(double c, ControlPath a) { return a *= c; }

namespace {

std::size_t fine_intervals(const ControlPath& a, const ControlPath& b) {
  if (a.horizon() != b.horizon()) throw InvalidArgument("L2 pairing of paths with different horizons");
  if (a.channels() != b.channels()) throw InvalidArgument("L2 pairing of paths with different channel counts");
  const std::size_t na = a.intervals();
  const std::size_t nb = b.intervals();
  const std::size_t fine = std::max(na, nb);
  if (fine % std::min(na, nb) != 0) {
    throw InvalidArgument("L2 pairing needs nested grids (" + std::to_string(na) + " vs " +
                          std::to_string(nb) + " intervals)");
  }
  return fine;
}

// Endpoint samples of `p` on fine cell j of a grid with `fine` cells.
void cell_ends(const ControlPath& p, std::size_t fine, std::size_t j, double* left, double* right) {
  const std::size_t ratio = fine / p.intervals();
  const std::size_t k = j / ratio;
  const double r = static_cast<double>(ratio);
  p.sample_cell(k, static_cast<double>(j % ratio) / r, left);
  p.sample_cell(k, static_cast<double>(j % ratio + 1) / r, right);
}

}  // namespace

double inner_product(const ControlPath& a, const ControlPath& b) {
  const std::size_t fine = fine_intervals(a, b);
  const std::size_t m = a.channels();
  const double h = a.horizon() / static_cast<double>(fine);
  Vector al(m), ar(m), bl(m), br(m);
  double acc = 0.0;
  for (std::size_t j = 0; j < fine; ++j) {
    cell_ends(a, fine, j, al.data(), ar.data());
    cell_ends(b, fine, j, bl.data(), br.data());
    acc += 0.5 * h * (al.dot(bl) + ar.dot(br));
  }
  return acc;
}

double l2_distance(const ControlPath& a, const ControlPath& b) {
  const std::size_t fine = fine_intervals(a, b);
  const std::size_t m = a.channels();
  const double h = a.horizon() / static_cast<double>(fine);
  const bool linear = a.interpolation() == ControlPath::Interpolation::Linear &&
                      b.interpolation() == ControlPath::Interpolation::Linear;
  Vector al(m), ar(m), bl(m), br(m);
  double acc = 0.0;
  for (std::size_t j = 0; j < fine; ++j) {
    cell_ends(a, fine, j, al.data(), ar.data());
    cell_ends(b, fine, j, bl.data(), br.data());
    const Vector d0 = al - bl;
    const Vector d1 = ar - br;
    acc += linear ? h / 3.0 * (d0.squaredNorm() + d0.dot(d1) + d1.squaredNorm())
                  : 0.5 * h * (d0.squaredNorm() + d1.squaredNorm());
  }
  return std::sqrt(acc);
}

}  // namespace affext
