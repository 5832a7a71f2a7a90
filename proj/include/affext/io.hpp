#pragma once

// CSV files (17 significant digits, one row per grid node) and JSON views of
// the library's result types.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "affext/analysis.hpp"
#include "affext/control_path.hpp"
#include "affext/dynamics.hpp"
#include "affext/extremals.hpp"
#include "affext/field_set.hpp"
#include "affext/inversion.hpp"
#include "affext/linalg.hpp"

namespace affext {

using Json = nlohmann::ordered_json;

/// Header `s,<prefix>1..<prefix>k`; row i is times[i] followed by values.row(i).
std::string format_csv(const std::vector<double>& times, const Matrix& values, const std::string& prefix);
std::string control_csv(const ControlPath& u);
std::string trajectory_csv(const Trajectory& xi);

void write_text(const std::filesystem::path& path, const std::string& text);

/// Reads a control CSV written by control_csv. The grid must be uniform on [0, T].
ControlPath read_control_csv(const std::filesystem::path& path,
                             ControlPath::Interpolation interp = ControlPath::Interpolation::Linear);

Json to_json(const Vector& v);
Json to_json(const Matrix& a);
Json to_json(const LieRankResult& r);
Json to_json(const GramReport& r);
Json to_json(const ExtremalSolution& s);
Json to_json(const LipschitzCertificate& c);
Json to_json(const CostateBoundReport& r);

Vector vector_from_json(const Json& j);

}  // namespace affext
