#pragma once

// Scenario files: flat `key = value` lines, `#` comments, and multi-line
// values written as
//
//   fields = <<
//   X1 = (1, 0, -x2/2)
//   X2 = (0, 1, x1/2)
//   >>
//
// Numeric values accept constant expressions (`1/(4*pi)`); vectors are
// comma-separated lists of them.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "affext/control_path.hpp"
#include "affext/dynamics.hpp"
#include "affext/extremals.hpp"
#include "affext/field_set.hpp"
#include "affext/inversion.hpp"
#include "affext/lagrangian.hpp"
#include "affext/linalg.hpp"

namespace affext {

struct Scenario {
  std::string name;
  std::size_t n = 0;
  std::size_t m = 0;
  std::string fields_text;
  std::optional<bool> bounded;
  std::string lagrangian_text;
  bool allow_abs = false;
  Vector x0;
  /// Empty when the scenario has no end-point constraint.
  Vector target;
  double T = 1.0;
  std::size_t grid = 32;
  std::size_t substeps = 4;

  /// Control for simulate / check-singular / endpoint-jacobian, expressions
  /// in s. Empty means u = 0.
  std::string control_text;
  ControlPath::Interpolation interpolation = ControlPath::Interpolation::Linear;

  double tol = 1e-8;
  std::size_t max_iter = 100;
  std::uint64_t seed = 0;
  std::size_t seeds = 20;
  /// NaN selects |target - x0| / T.
  double seed_scale = std::numeric_limits<double>::quiet_NaN();

  Vector lie_point;  // empty: x0
  std::size_t lie_depth = 4;
  double lie_tol = 1e-9;

  std::size_t fd_probes = 20;
  double fd_eps = 1e-5;
  double singular_threshold = 1e-8;

  std::size_t dict_kmax = 8;
  double chart_radius = std::numeric_limits<double>::quiet_NaN();
  double det_tol = 0.1;
  std::size_t chart_probes = 10;
  std::vector<double> anchor_times;
  /// "extremal" (lowest-cost solve-extremal solution) or "control".
  std::string anchor = "extremal";

  std::string out;

  void validate() const;

  FieldSet fields() const;
  Lagrangian lagrangian() const;
  ControlPath control() const;
  IntegratorOptions integrator() const;
  ShootOptions shoot_options() const;
  ChartOptions chart_options() const;
  Dictionary dictionary() const;
  std::vector<Vector> shooting_seeds() const;
  bool has_lagrangian() const noexcept { return !lagrangian_text.empty(); }
  bool has_target() const noexcept { return target.size() > 0; }
};

/// Throws ParseError on malformed text and InvalidArgument on inconsistent values.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

/// Constant expression or comma-separated list of them.
double parse_number(std::string_view text);
Vector parse_vector(std::string_view text);

}  // namespace affext
