#include "affext/scenario.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "affext/errors.hpp"

namespace affext {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_line(std::size_t line, const std::string& msg) {
  throw ParseError(ParseError::Kind::Structure, line, "scenario line " + std::to_string(line) + ": " + msg);
}

std::size_t parse_count(std::string_view v, const std::string& key) {
  const double d = parse_number(v);
  if (!(d >= 0.0) || d != std::floor(d) || d > 1e15) throw InvalidArgument(key + " must be a non-negative integer");
  return static_cast<std::size_t>(d);
}

bool parse_bool(std::string_view v, const std::string& key) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw InvalidArgument(key + " must be true or false");
}

}  // namespace

double parse_number(std::string_view text) { return parse_constant(trim(text)); }

Vector parse_vector(std::string_view text) {
  const std::vector<Expr> parts = parse_expression_list(trim(text), SymbolTable{});
  Vector v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = parts[i].evaluate(std::span<const double>{});
  }
  return v;
}

Scenario parse_scenario(std::string_view text) {
  std::map<std::string, std::pair<std::string, std::size_t>> kv;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) bad_line(lineno, "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) bad_line(lineno, "empty key");
    const std::size_t start = lineno;
    if (value == "<<") {
      value.clear();
      bool closed = false;
      while (std::getline(in, raw)) {
        ++lineno;
        std::string_view body = raw;
        if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        if (trim(body) == ">>") {
          closed = true;
          break;
        }
        if (!trim(body).empty()) {
          if (!value.empty()) value += '\n';
          value += trim(body);
        }
      }
      if (!closed) bad_line(start, "unterminated << block for '" + key + "'");
    }
    if (!kv.emplace(key, std::make_pair(value, start)).second) bad_line(start, "duplicate key '" + key + "'");
  }

  Scenario s;
  using Setter = std::function<void(const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"name", [&](const std::string& v) { s.name = v; }},
      {"n", [&](const std::string& v) { s.n = parse_count(v, "n"); }},
      {"m", [&](const std::string& v) { s.m = parse_count(v, "m"); }},
      {"fields", [&](const std::string& v) { s.fields_text = v; }},
      {"bounded", [&](const std::string& v) { s.bounded = parse_bool(v, "bounded"); }},
      {"lagrangian", [&](const std::string& v) { s.lagrangian_text = v; }},
      {"allow_abs", [&](const std::string& v) { s.allow_abs = parse_bool(v, "allow_abs"); }},
      {"x0", [&](const std::string& v) { s.x0 = parse_vector(v); }},
      {"target", [&](const std::string& v) { s.target = parse_vector(v); }},
      {"T", [&](const std::string& v) { s.T = parse_number(v); }},
      {"grid", [&](const std::string& v) { s.grid = parse_count(v, "grid"); }},
      {"substeps", [&](const std::string& v) { s.substeps = parse_count(v, "substeps"); }},
      {"control", [&](const std::string& v) { s.control_text = v; }},
      {"interpolation",
       [&](const std::string& v) {
         if (v == "linear") s.interpolation = ControlPath::Interpolation::Linear;
         else if (v == "hold") s.interpolation = ControlPath::Interpolation::Hold;
         else throw InvalidArgument("interpolation must be linear or hold");
       }},
      {"tol", [&](const std::string& v) { s.tol = parse_number(v); }},
      {"max_iter", [&](const std::string& v) { s.max_iter = parse_count(v, "max_iter"); }},
      {"seed", [&](const std::string& v) { s.seed = parse_count(v, "seed"); }},
      {"seeds", [&](const std::string& v) { s.seeds = parse_count(v, "seeds"); }},
      {"seed_scale", [&](const std::string& v) { s.seed_scale = parse_number(v); }},
      {"lie_point", [&](const std::string& v) { s.lie_point = parse_vector(v); }},
      {"lie_depth", [&](const std::string& v) { s.lie_depth = parse_count(v, "lie_depth"); }},
      {"lie_tol", [&](const std::string& v) { s.lie_tol = parse_number(v); }},
      {"fd_probes", [&](const std::string& v) { s.fd_probes = parse_count(v, "fd_probes"); }},
      {"fd_eps", [&](const std::string& v) { s.fd_eps = parse_number(v); }},
      {"singular_threshold", [&](const std::string& v) { s.singular_threshold = parse_number(v); }},
      {"dict_kmax", [&](const std::string& v) { s.dict_kmax = parse_count(v, "dict_kmax"); }},
      {"chart_radius", [&](const std::string& v) { s.chart_radius = parse_number(v); }},
      {"det_tol", [&](const std::string& v) { s.det_tol = parse_number(v); }},
      {"chart_probes", [&](const std::string& v) { s.chart_probes = parse_count(v, "chart_probes"); }},
      {"anchor_times",
       [&](const std::string& v) {
         const Vector t = parse_vector(v);
         s.anchor_times.assign(t.data(), t.data() + t.size());
       }},
      {"anchor",
       [&](const std::string& v) {
         if (v != "extremal" && v != "control") throw InvalidArgument("anchor must be extremal or control");
         s.anchor = v;
       }},
      {"out", [&](const std::string& v) { s.out = v; }},
  };
  for (const auto& [key, entry] : kv) {
    const auto it = setters.find(key);
    if (it == setters.end()) bad_line(entry.second, "unknown key '" + key + "'");
    try {
      it->second(entry.first);
    } catch (const ParseError& e) {
      bad_line(entry.second, "'" + key + "': " + e.what());
    }
  }
  for (const char* required : {"n", "m", "fields", "x0"}) {
    if (!kv.count(required)) throw InvalidArgument(std::string("scenario is missing '") + required + "'");
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot read scenario '" + path.string() + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_scenario(buf.str());
}

void Scenario::validate() const {
  auto dims = [&](const Vector& v, const char* what) {
    if (v.size() != 0 && static_cast<std::size_t>(v.size()) != n) {
      throw InvalidArgument(std::string(what) + " has " + std::to_string(v.size()) + " entries, expected n = " +
                            std::to_string(n));
    }
  };
  if (n == 0 || m == 0) throw InvalidArgument("n and m must be positive");
  if (m > n) throw InvalidArgument("m must not exceed n");
  if (static_cast<std::size_t>(x0.size()) != n) throw InvalidArgument("x0 must have n entries");
  dims(target, "target");
  dims(lie_point, "lie_point");
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("T must be positive");
  if (grid == 0) throw InvalidArgument("grid must be at least 1");
  if (substeps == 0) throw InvalidArgument("substeps must be at least 1");
  if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (lie_depth == 0) throw InvalidArgument("lie_depth must be at least 1");
  if (!(fd_eps > 0.0)) throw InvalidArgument("fd_eps must be positive");
  if (!std::isnan(seed_scale) && !(seed_scale > 0.0)) throw InvalidArgument("seed_scale must be positive");
  if (!std::isnan(chart_radius) && !(chart_radius > 0.0)) throw InvalidArgument("chart_radius must be positive");
  for (double t : anchor_times) {
    if (!(t > 0.0) || t > T) throw InvalidArgument("anchor times must lie in (0, T]");
  }
  // Parse eagerly so arity errors surface at load time.
  fields();
  if (has_lagrangian()) lagrangian();
  if (!control_text.empty()) control();
}

FieldSet Scenario::fields() const { return parse_field_set(fields_text, n, m, bounded); }

Lagrangian Scenario::lagrangian() const {
  if (!has_lagrangian()) throw InvalidArgument("scenario has no lagrangian");
  return parse_lagrangian(lagrangian_text, n, m, allow_abs);
}

ControlPath Scenario::control() const {
  if (control_text.empty()) return ControlPath::zero(T, grid, m);
  const std::vector<Expr> e = parse_expression_list(control_text, SymbolTable::single("s"));
  if (e.size() != m) {
    throw InvalidArgument("control has " + std::to_string(e.size()) + " components, expected m = " +
                          std::to_string(m));
  }
  return ControlPath::from_function(
      T, grid, m,
      [&](double s) {
        Vector u(static_cast<Eigen::Index>(m));
        const double arg[1] = {s};
        for (std::size_t i = 0; i < m; ++i) u[static_cast<Eigen::Index>(i)] = e[i].evaluate(arg);
        return u;
      },
      interpolation);
}

IntegratorOptions Scenario::integrator() const {
  IntegratorOptions o;
  o.substeps = substeps;
  return o;
}

ShootOptions Scenario::shoot_options() const {
  ShootOptions o;
  o.grid = grid;
  o.integrator = integrator();
  o.tol = tol;
  o.max_iter = max_iter;
  return o;
}

ChartOptions Scenario::chart_options() const {
  ChartOptions o;
  o.r_init = chart_radius;
  o.det_tol = det_tol;
  o.probe_seed = seed;
  o.integrator = integrator();
  return o;
}

Dictionary Scenario::dictionary() const { return Dictionary::standard(m, T, dict_kmax); }

std::vector<Vector> Scenario::shooting_seeds() const {
  if (!has_target()) throw InvalidArgument("scenario has no target");
  double scale = seed_scale;
  if (std::isnan(scale)) scale = (target - x0).norm() / T;
  if (!(scale > 0.0)) scale = 1.0;
  return default_seeds(n, seeds, scale, seed);
}

}  // namespace affext
