#include "affext/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "affext/errors.hpp"

namespace affext {

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

std::string format_csv(const std::vector<double>& times, const Matrix& values, const std::string& prefix) {
  if (static_cast<Eigen::Index>(times.size()) != values.rows()) throw InvalidArgument("csv: time/row count mismatch");
  std::string out = "s";
  for (Eigen::Index j = 0; j < values.cols(); ++j) out += "," + prefix + std::to_string(j + 1);
  out += '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    append_number(out, times[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      out += ',';
      append_number(out, values(i, j));
    }
    out += '\n';
  }
  return out;
}

std::string control_csv(const ControlPath& u) {
  std::vector<double> t(u.intervals() + 1);
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = u.time(k);
  return format_csv(t, u.values(), "u");
}

std::string trajectory_csv(const Trajectory& xi) { return format_csv(xi.times, xi.states, "x"); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw InvalidArgument("write to '" + path.string() + "' failed");
}

ControlPath read_control_csv(const std::filesystem::path& path, ControlPath::Interpolation interp) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot read control csv '" + path.string() + "'");
  std::string line;
  if (!std::getline(f, line)) throw InvalidArgument("control csv is empty");
  const auto cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (cols == 0 || line.rfind("s,", 0) != 0) throw InvalidArgument("control csv header must start with 's,'");
  std::vector<double> times;
  std::vector<double> vals;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(row, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw InvalidArgument("control csv: bad number '" + cell + "'");
      (c == 0 ? times : vals).push_back(v);
      ++c;
    }
    if (c != cols + 1) throw InvalidArgument("control csv: ragged row");
  }
  if (times.size() < 2) throw InvalidArgument("control csv needs at least two rows");
  const double T = times.back();
  const std::size_t N = times.size() - 1;
  for (std::size_t k = 0; k <= N; ++k) {
    const double expect = T * static_cast<double>(k) / static_cast<double>(N);
    if (std::abs(times[k] - expect) > 1e-12 * std::max(1.0, T)) throw InvalidArgument("control csv grid is not uniform");
  }
  Matrix values(static_cast<Eigen::Index>(N + 1), static_cast<Eigen::Index>(cols));
  for (std::size_t k = 0; k <= N; ++k) {
    for (std::size_t j = 0; j < cols; ++j) {
      values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = vals[k * cols + j];
    }
  }
  return ControlPath(T, std::move(values), interp);
}

Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json to_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
  return a;
}

Json to_json(const LieRankResult& r) {
  Json j;
  j["rank"] = r.rank;
  j["depth"] = r.depth;
  j["full_rank"] = r.full_rank;
  j["rank_by_depth"] = r.rank_by_depth;
  Json basis = Json::array();
  for (const Vector& v : r.basis) basis.push_back(to_json(v));
  j["basis"] = basis;
  j["message"] = r.message;
  return j;
}

Json to_json(const GramReport& r) {
  Json j;
  j["sigma_min"] = r.sigma_min;
  j["sigma_max"] = r.sigma_max;
  j["ratio"] = r.ratio;
  j["threshold"] = r.threshold;
  j["singular"] = r.singular;
  j["abnormal_candidate"] = r.abnormal_candidate ? to_json(*r.abnormal_candidate) : Json(nullptr);
  j["gram"] = to_json(r.gram);
  return j;
}

Json to_json(const ExtremalSolution& s) {
  Json j;
  j["phi"] = s.phi;
  j["p0"] = to_json(s.p0);
  j["lambda"] = to_json(s.lambda);
  j["hamiltonian"] = s.H0;
  j["residuals"] = {{"endpoint_gap", s.residuals.endpoint_gap},
                    {"stationarity", s.residuals.stationarity},
                    {"hamiltonian_drift", s.residuals.hamiltonian_drift}};
  j["iterations"] = s.iterations;
  j["grid"] = s.u.intervals();
  j["steps"] = s.xi.steps();
  j["control_sup"] = s.u.sup_norm();
  j["control_lipschitz"] = s.u.lipschitz();
  return j;
}

Json to_json(const LipschitzCertificate& c) {
  Json j;
  j["sup_phi"] = c.sup_phi;
  j["K_bound"] = c.K_bound;
  j["K_lip"] = c.K_lip;
  j["K_quotient"] = c.K_quotient;
  j["K_final"] = c.K_final;
  j["K_bound_refined"] = c.K_bound_refined;
  j["K_lip_refined"] = c.K_lip_refined;
  j["grid_stability"] = c.grid_stability;
  j["bound_stability"] = c.bound_stability;
  j["chain_status"] = {{"bounded_cost", c.chain.bounded_cost},
                       {"bounded_controls", c.chain.bounded_controls},
                       {"lipschitz_controls", c.chain.lipschitz_controls}};
  j["certified"] = c.certified;
  return j;
}

Json to_json(const CostateBoundReport& r) {
  return Json{{"R_traj", r.R_traj},
              {"R_costate", r.R_costate},
              {"R_traj_refined", r.R_traj_refined},
              {"R_costate_refined", r.R_costate_refined},
              {"relative_change", r.relative_change},
              {"finite", r.finite}};
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw InvalidArgument("expected a JSON array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidArgument("expected a JSON array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

}  // namespace affext
