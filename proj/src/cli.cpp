#include "affext/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "affext/analysis.hpp"
#include "affext/errors.hpp"
#include "affext/extremals.hpp"
#include "affext/inversion.hpp"
#include "affext/io.hpp"
#include "affext/scenario.hpp"

namespace affext {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string scenario;
  std::string out;
  std::string chart;
  std::string beta;
  std::optional<std::size_t> grid;
  std::optional<std::uint64_t> seed;
  std::optional<double> anchor_time;
  std::optional<double> s;
  bool json = false;
};

struct Report {
  Json json;
  std::vector<std::string> lines;
  int code = kExitOk;
};

// Files are written under the output directory when one is given.
class Sink {
public:
  explicit Sink(std::string dir) : dir_(std::move(dir)) {}
  bool enabled() const { return !dir_.empty(); }
  fs::path path(const std::string& name) const { return fs::path(dir_) / name; }
  void write(const std::string& name, const std::string& text, Json& files) const {
    if (!enabled()) return;
    write_text(path(name), text);
    files.push_back(name);
  }

private:
  std::string dir_;
};

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(10);
  o << v;
  return o.str();
}

std::string fmt(const Vector& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + ")";
}

Json header(const std::string& command, const Scenario& sc) {
  Json j;
  j["command"] = command;
  j["scenario"] = sc.name;
  j["n"] = sc.n;
  j["m"] = sc.m;
  j["T"] = sc.T;
  j["grid"] = sc.grid;
  j["seed"] = sc.seed;
  return j;
}

ControlPath random_direction(std::mt19937_64& rng, const Scenario& sc) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Matrix c(3, static_cast<Eigen::Index>(sc.m));
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = d(rng);
  return ControlPath::from_function(sc.T, sc.grid, sc.m, [&](double s) {
    const double w = 2.0 * M_PI * s / sc.T;
    Vector v(static_cast<Eigen::Index>(sc.m));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = c(0, i) + c(1, i) * std::cos(w) + c(2, i) * std::sin(w);
    return v;
  });
}

void require_extremal_problem(const Scenario& sc) {
  if (!sc.has_lagrangian()) throw InvalidArgument("scenario needs a lagrangian for this command");
  if (!sc.has_target()) throw InvalidArgument("scenario needs a target for this command");
}

MultiStartResult solve_family(const Scenario& sc) {
  require_extremal_problem(sc);
  return multi_start(sc.fields(), sc.lagrangian(), sc.x0, sc.target, sc.T, sc.shooting_seeds(), sc.shoot_options());
}

Report cmd_simulate(const Scenario& sc, const Sink& sink) {
  const FieldSet F = sc.fields();
  const ControlPath u = sc.control();
  const Trajectory xi = integrate(F, u, sc.x0, sc.T, sc.integrator());
  Report r;
  r.json = header("simulate", sc);
  r.json["endpoint"] = to_json(xi.final_state());
  r.json["steps"] = xi.steps();
  if (sc.has_lagrangian()) r.json["phi"] = phi_functional(sc.lagrangian(), F, u, sc.x0, sc.T, sc.integrator());
  Json files = Json::array();
  sink.write("control.csv", control_csv(u), files);
  sink.write("trajectory.csv", trajectory_csv(xi), files);
  r.json["files"] = files;
  r.lines.push_back("endpoint " + fmt(xi.final_state()));
  if (sc.has_lagrangian()) r.lines.push_back("phi " + fmt(r.json["phi"].get<double>()));
  return r;
}

Report cmd_lie_rank(const Scenario& sc, const Sink&) {
  const Vector x = sc.lie_point.size() ? sc.lie_point : sc.x0;
  const LieRankResult lr = lie_rank(sc.fields(), x, sc.lie_depth, sc.lie_tol);
  Report r;
  r.json = header("lie-rank", sc);
  r.json["point"] = to_json(x);
  r.json["result"] = to_json(lr);
  r.lines.push_back("rank " + std::to_string(lr.rank) + " depth " + std::to_string(lr.depth));
  r.lines.push_back(lr.message);
  if (!lr.full_rank) r.code = kExitCertificate;
  return r;
}

Report cmd_endpoint_jacobian(const Scenario& sc, const Sink& sink) {
  const FieldSet F = sc.fields();
  const ControlPath u = sc.control();
  const IntegratorOptions io = sc.integrator();
  const Linearization lin(F, u, sc.x0, sc.T, io);
  Matrix J(static_cast<Eigen::Index>(sc.n), static_cast<Eigen::Index>(sc.m));
  for (std::size_t i = 0; i < sc.m; ++i) {
    Vector e = Vector::Zero(static_cast<Eigen::Index>(sc.m));
    e[static_cast<Eigen::Index>(i)] = 1.0;
    J.col(static_cast<Eigen::Index>(i)) = lin.apply(ControlPath::constant(sc.T, sc.grid, e));
  }
  std::mt19937_64 rng(sc.seed);
  double worst = 0.0, worst_mixed = 0.0;
  for (std::size_t k = 0; k < sc.fd_probes; ++k) {
    const ControlPath v = random_direction(rng, sc);
    const Vector an = lin.apply(v);
    const Vector fd = (endpoint(F, u + sc.fd_eps * v, sc.x0, sc.T, io) - endpoint(F, u - sc.fd_eps * v, sc.x0, sc.T, io)) /
                      (2.0 * sc.fd_eps);
    worst = std::max(worst, (an - fd).norm() / std::max(fd.norm(), 1e-300));
    worst_mixed = std::max(worst_mixed, (an - fd).norm() / std::max(fd.norm(), 1.0));
  }
  Report r;
  r.json = header("endpoint-jacobian", sc);
  r.json["constant_direction_images"] = to_json(J);
  r.json["gram"] = to_json(lin.gram());
  r.json["fd_probes"] = sc.fd_probes;
  r.json["fd_eps"] = sc.fd_eps;
  r.json["max_relative_error"] = worst;
  // |dE v - fd| / max(1, |fd|); the pure ratio is reported above for reference.
  r.json["max_scaled_error"] = worst_mixed;
  constexpr double kLimit = 1e-5;
  r.json["passed"] = worst_mixed < kLimit;
  Json files = Json::array();
  sink.write("control.csv", control_csv(u), files);
  r.json["files"] = files;
  r.lines.push_back("finite-difference cross-check over " + std::to_string(sc.fd_probes) +
                    " directions: max relative error " + fmt(worst) + ", scaled " + fmt(worst_mixed));
  if (!(worst_mixed < kLimit)) r.code = kExitCertificate;
  return r;
}

Report cmd_solve_extremal(const Scenario& sc, const Sink& sink) {
  const MultiStartResult ms = solve_family(sc);
  const FieldSet F = sc.fields();
  Report r;
  r.json = header("solve-extremal", sc);
  r.json["target"] = to_json(sc.target);
  r.json["seeds"] = sc.seeds;
  r.json["converged"] = ms.converged;
  r.json["failures"] = ms.failures.size();
  Json sols = Json::array();
  Json files = Json::array();
  for (std::size_t k = 0; k < ms.solutions.size(); ++k) {
    const ExtremalSolution& s = ms.solutions[k];
    Json j = to_json(s);
    j["index"] = k;
    sols.push_back(j);
    const std::string tag = std::to_string(k);
    sink.write("control_" + tag + ".csv", control_csv(s.u), files);
    sink.write("trajectory_" + tag + ".csv", trajectory_csv(s.xi), files);
    sink.write("costate_" + tag + ".csv", format_csv(s.xi.times, s.p, "p"), files);
    r.lines.push_back("extremal " + tag + ": phi " + fmt(s.phi) + " gap " + fmt(s.residuals.endpoint_gap) +
                      " lambda " + fmt(s.lambda));
  }
  r.json["solutions"] = sols;
  r.json["files"] = files;
  r.lines.insert(r.lines.begin(), std::to_string(ms.solutions.size()) + " distinct extremals from " +
                                      std::to_string(sc.seeds) + " seeds (" + std::to_string(ms.converged) +
                                      " converged)");
  if (ms.solutions.empty()) r.code = kExitNonConvergence;
  return r;
}

Report cmd_check_singular(const Scenario& sc, const Sink&) {
  const GramReport g = singularity_report(sc.fields(), sc.control(), sc.x0, sc.T, sc.singular_threshold,
                                          sc.integrator());
  Report r;
  r.json = header("check-singular", sc);
  r.json["report"] = to_json(g);
  r.lines.push_back(std::string(g.singular ? "singular" : "non-singular") + ": ratio " + fmt(g.ratio) +
                    " (threshold " + fmt(g.threshold) + ")");
  if (g.abnormal_candidate) r.lines.push_back("abnormal candidate " + fmt(*g.abnormal_candidate));
  return r;
}

Report cmd_certify_lipschitz(const Scenario& sc, const Sink&) {
  const MultiStartResult ms = solve_family(sc);
  Report r;
  r.json = header("certify-lipschitz", sc);
  r.json["solutions"] = ms.solutions.size();
  if (ms.solutions.empty()) {
    r.code = kExitNonConvergence;
    r.lines.push_back("no extremals converged; nothing to certify");
    return r;
  }
  const FieldSet F = sc.fields();
  const RefinedFamily ref = refine_family(F, sc.lagrangian(), sc.target, ms.solutions, sc.shoot_options());
  const LipschitzCertificate cert = lipschitz_certificate(ms.solutions, ref.solutions);
  const CostateBoundReport cb = costate_bound_check(ms.solutions, ref.solutions);
  const Assumption4Report a4 = assumption4_check(F, ms.solutions, sc.singular_threshold, sc.integrator());
  r.json["refined_grid"] = 2 * sc.grid;
  r.json["lost_on_refinement"] = ref.lost;
  r.json["certificate"] = to_json(cert);
  r.json["costate_bounds"] = to_json(cb);
  r.json["singular_extremals"] = a4.violations;
  const bool ok = cert.certified && a4.clean() && cb.finite;
  r.json["passed"] = ok;
  r.lines.push_back("K_bound " + fmt(cert.K_bound) + " K_lip " + fmt(cert.K_lip) + " grid stability " +
                    fmt(cert.grid_stability));
  r.lines.push_back(std::string("chain (i) ") + (cert.chain.bounded_cost ? "ok" : "fail") + " (ii) " +
                    (cert.chain.bounded_controls ? "ok" : "fail") + " (iii) " +
                    (cert.chain.lipschitz_controls ? "ok" : "fail"));
  r.lines.push_back(ok ? "certified" : "not certified");
  if (!ok) r.code = kExitCertificate;
  return r;
}

Json chart_json(const InversionChart& c, std::size_t k_max, const std::string& anchor_csv, const std::string& name) {
  Json basis = Json::array();
  for (std::size_t idx : c.basis.indices) {
    const Direction& d = c.dictionary[idx];
    basis.push_back({{"index", idx}, {"label", d.label}, {"expression", d.to_string()}, {"lipschitz", d.lipschitz}});
  }
  Json j;
  j["scenario"] = name;
  j["anchor_time"] = c.t;
  j["anchor_control"] = anchor_csv;
  j["x0"] = to_json(c.x0);
  j["beta0"] = to_json(c.beta0);
  j["dictionary"] = {{"kind", "standard"}, {"k_max", k_max}, {"horizon", c.anchor.horizon()}};
  j["basis"] = basis;
  j["r"] = c.r;
  j["det_anchor"] = c.det_anchor;
  j["det_floor"] = c.det_floor;
  j["alpha_bound"] = to_json(c.alpha_bound);
  j["lipschitz_est"] = {{"k", c.lipschitz.k}, {"k_hat", c.lipschitz.k_hat}, {"ell_hat", c.lipschitz.ell_hat}};
  j["probe_seed"] = c.options.probe_seed;
  j["det_tol"] = c.options.det_tol;
  j["substeps"] = c.options.integrator.substeps;
  j["halvings"] = c.halvings;
  return j;
}

Report cmd_build_chart(const Scenario& sc, const Sink& sink, const Flags& flags) {
  const FieldSet F = sc.fields();
  ControlPath anchor = sc.control();
  Report r;
  r.json = header("build-chart", sc);
  if (sc.anchor == "extremal") {
    const MultiStartResult ms = solve_family(sc);
    if (ms.solutions.empty()) throw ConvergenceError("no extremal converged to anchor the chart", 0.0);
    anchor = ms.solutions.front().u;
    r.json["anchor_source"] = "extremal";
    r.json["anchor_phi"] = ms.solutions.front().phi;
  } else {
    r.json["anchor_source"] = "control";
  }
  std::vector<double> times = sc.anchor_times;
  if (flags.anchor_time) times = {*flags.anchor_time};
  if (times.empty()) times = {sc.T};
  for (double t : times) {
    if (!(t > 0.0) || t > sc.T) throw InvalidArgument("anchor time must lie in (0, T]");
  }

  const Dictionary dict = sc.dictionary();
  Json files = Json::array();
  sink.write("anchor_control.csv", control_csv(anchor), files);
  Json charts = Json::array();
  bool ok = true;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const InversionChart c = build_chart(F, anchor, sc.x0, times[i], dict, sc.chart_options());
    std::mt19937_64 rng(sc.seed + i);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    double worst = 0.0, lip = 0.0;
    bool lip_ok = true;
    Vector warm;
    for (std::size_t k = 0; k < sc.chart_probes; ++k) {
      const double s = c.t + 0.9 * c.r * unit(rng);
      Vector d(static_cast<Eigen::Index>(sc.n));
      for (Eigen::Index q = 0; q < d.size(); ++q) d[q] = unit(rng);
      d *= 0.9 * c.r * std::abs(unit(rng)) / d.norm();
      const Vector beta = c.beta0 + d;
      ChartEvalInfo info;
      const ControlPath v = chart_eval(c, s, beta, &info, warm.size() ? &warm : nullptr);
      warm = info.alpha;
      worst = std::max(worst, (endpoint(F, v, sc.x0, s, sc.integrator()) - beta).norm());
      lip = std::max(lip, v.lipschitz());
      lip_ok = lip_ok && within_declared_lipschitz(c, v);
    }
    const bool pass = worst < 1e-7 && lip_ok;
    ok = ok && pass;
    const std::string name = "chart_" + std::to_string(i) + ".json";
    Json cj = chart_json(c, sc.dict_kmax, "anchor_control.csv", sc.name);
    sink.write(name, cj.dump(2) + "\n", files);
    cj["round_trip"] = {{"probes", sc.chart_probes},
                        {"max_residual", worst},
                        {"max_control_lipschitz", lip},
                        {"passed", pass}};
    charts.push_back(cj);
    r.lines.push_back("chart at t = " + fmt(c.t) + ": r " + fmt(c.r) + " k " + fmt(c.lipschitz.k) + " k_hat " +
                      fmt(c.lipschitz.k_hat) + " round trip " + fmt(worst) + (pass ? "" : " FAILED"));
  }
  r.json["charts"] = charts;
  r.json["files"] = files;
  if (!ok) r.code = kExitCertificate;
  return r;
}

Report cmd_eval_chart(const Scenario& sc, const Sink& sink, const Flags& flags) {
  if (flags.chart.empty()) throw InvalidArgument("eval-chart needs --chart <chart.json>");
  std::ifstream f(flags.chart);
  if (!f) throw InvalidArgument("cannot read chart '" + flags.chart + "'");
  Json cj;
  try {
    cj = Json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("chart file is not valid JSON: ") + e.what());
  }
  try {
    const fs::path csv = fs::path(flags.chart).parent_path() / cj.at("anchor_control").get<std::string>();
    const ControlPath anchor = read_control_csv(csv);
    if (anchor.channels() != sc.m) throw InvalidArgument("chart anchor control has the wrong channel count");
    ChartOptions o = sc.chart_options();
    o.det_tol = cj.at("det_tol").get<double>();
    o.probe_seed = cj.at("probe_seed").get<std::uint64_t>();
    o.integrator.substeps = cj.at("substeps").get<std::size_t>();
    std::vector<std::size_t> idx;
    for (const Json& b : cj.at("basis")) idx.push_back(b.at("index").get<std::size_t>());
    const Json& le = cj.at("lipschitz_est");
    const ChartLipschitz lip{le.at("k").get<double>(), le.at("k_hat").get<double>(), le.at("ell_hat").get<double>()};
    const Dictionary dict = Dictionary::standard(sc.m, anchor.horizon(), cj.at("dictionary").at("k_max").get<std::size_t>());
    const Vector x0 = vector_from_json(cj.at("x0"));
    const InversionChart c = assemble_chart(sc.fields(), anchor, x0, cj.at("anchor_time").get<double>(), dict, idx,
                                            cj.at("r").get<double>(), vector_from_json(cj.at("alpha_bound")), lip, o);
    const double s = flags.s.value_or(c.t);
    const Vector beta = flags.beta.empty() ? c.beta0 : parse_vector(flags.beta);
    ChartEvalInfo info;
    const ControlPath v = chart_eval(c, s, beta, &info);
    const double residual = (endpoint(c.fields, v, x0, s, o.integrator) - beta).norm();
    Report r;
    r.json = header("eval-chart", sc);
    r.json["s"] = s;
    r.json["beta"] = to_json(beta);
    r.json["alpha"] = to_json(info.alpha);
    r.json["residual"] = residual;
    r.json["det"] = info.det;
    r.json["iterations"] = info.iterations;
    r.json["control_lipschitz"] = v.lipschitz();
    r.json["declared_k"] = c.lipschitz.k;
    Json files = Json::array();
    sink.write("chart_control.csv", control_csv(v), files);
    r.json["files"] = files;
    r.lines.push_back("alpha " + fmt(info.alpha) + " residual " + fmt(residual));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed chart file: ") + e.what());
  }
}

Report cmd_gl_values(const Scenario& sc, const Sink&) {
  if (sc.n != 1 || sc.m != 1) throw InvalidArgument("gl-values needs a one-dimensional scenario (n = m = 1)");
  const FieldSet F = sc.fields();
  const Lagrangian L = sc.lagrangian();
  const IntegratorOptions io = sc.integrator();
  // States xi(w) = 0 and xi(w) = +-(1 - |w|) on [-1, 1], with s = w + 1.
  auto tent = [&](double sign) {
    return ControlPath::from_function(
        sc.T, sc.grid, 1, [&](double s) { return Vector{{s < 0.5 * sc.T ? sign : -sign}}; },
        ControlPath::Interpolation::Hold);
  };
  const double zero = phi_functional(L, F, ControlPath::zero(sc.T, sc.grid, 1), sc.x0, sc.T, io);
  const double plus = phi_functional(L, F, tent(1.0), sc.x0, sc.T, io);
  const double minus = phi_functional(L, F, tent(-1.0), sc.x0, sc.T, io);
  const double ref0 = 4.0, ref1 = 16.0 / 15.0;
  const double err = std::max({std::abs(zero - ref0), std::abs(plus - ref1), std::abs(minus - ref1)});
  Report r;
  r.json = header("gl-values", sc);
  r.json["phi_zero"] = zero;
  r.json["phi_plus"] = plus;
  r.json["phi_minus"] = minus;
  r.json["reference"] = {{"phi_zero", ref0}, {"phi_plus", ref1}, {"phi_minus", ref1}};
  r.json["max_abs_error"] = err;
  r.json["passed"] = err < 1e-6;
  r.lines.push_back("Phi(0) = " + fmt(zero));
  r.lines.push_back("Phi(xi+) = " + fmt(plus));
  r.lines.push_back("Phi(xi-) = " + fmt(minus));
  r.lines.push_back("max error vs 4 and 16/15: " + fmt(err));
  if (!(err < 1e-6)) r.code = kExitCertificate;
  return r;
}

}  // namespace

int exit_code_for_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NonSmoothError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ExpressionGrowthError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const BasisDeficiencyError& e) {
    err << "certificate failure: " << e.what() << "\n";
    return kExitCertificate;
  } catch (const ChartError& e) {
    err << "certificate failure: " << e.what() << "\n";
    return kExitCertificate;
  } catch (const Error& e) {
    // Convergence, divergence, diffeomorphism and non-finite failures.
    err << "solver failure: " << e.what() << "\n";
    return kExitNonConvergence;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitNonConvergence;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Extremals, certificates and inversion charts for driftless affine control systems", "affext"};
  app.require_subcommand(1);
  Flags flags;
  struct Command {
    const char* name;
    const char* help;
    bool chart;
  };
  const std::vector<Command> commands = {
      {"simulate", "integrate the scenario control and write control/trajectory CSV", false},
      {"lie-rank", "bracket-generating rank at lie_point (default x0)", false},
      {"endpoint-jacobian", "dE images and a finite-difference cross-check", false},
      {"solve-extremal", "multi-start Hamiltonian shooting to the target", false},
      {"check-singular", "Gram spectrum of dE at the scenario control", false},
      {"certify-lipschitz", "regularity certificate over the extremal family at N and 2N", false},
      {"build-chart", "local inversion charts at anchor times", true},
      {"eval-chart", "evaluate a saved chart at (s, beta)", true},
      {"gl-values", "cost of the three reference states of the GL example", false},
  };
  std::map<std::string, CLI::App*> subs;
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--scenario", flags.scenario, "scenario file")->required();
    sub->add_option("--out", flags.out, "output directory for CSV and JSON files");
    sub->add_option("--grid", flags.grid, "override the control grid N");
    sub->add_option("--seed", flags.seed, "override the random seed");
    sub->add_flag("--json", flags.json, "print the JSON report on stdout");
    if (c.chart) {
      sub->add_option("--anchor-time", flags.anchor_time, "chart anchor time t");
      sub->add_option("--chart", flags.chart, "chart JSON written by build-chart");
      sub->add_option("--s", flags.s, "evaluation time s");
      sub->add_option("--beta", flags.beta, "evaluation point, comma separated");
    }
    subs[c.name] = sub;
  }

  if (!args.empty() && !args.front().empty() && args.front()[0] != '-' && !subs.count(args.front())) {
    err << "error: unknown subcommand '" << args.front() << "'\n" << app.help();
    return kExitValidation;
  }
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitValidation;
  }

  try {
    Scenario sc = load_scenario(flags.scenario);
    if (flags.grid) sc.grid = *flags.grid;
    if (flags.seed) sc.seed = *flags.seed;
    if (!flags.out.empty()) sc.out = flags.out;
    sc.validate();
    const Sink sink(sc.out);

    Report rep;
    const CLI::App* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    if (name == "simulate") rep = cmd_simulate(sc, sink);
    else if (name == "lie-rank") rep = cmd_lie_rank(sc, sink);
    else if (name == "endpoint-jacobian") rep = cmd_endpoint_jacobian(sc, sink);
    else if (name == "solve-extremal") rep = cmd_solve_extremal(sc, sink);
    else if (name == "check-singular") rep = cmd_check_singular(sc, sink);
    else if (name == "certify-lipschitz") rep = cmd_certify_lipschitz(sc, sink);
    else if (name == "build-chart") rep = cmd_build_chart(sc, sink, flags);
    else if (name == "eval-chart") rep = cmd_eval_chart(sc, sink, flags);
    else rep = cmd_gl_values(sc, sink);

    rep.json["exit_code"] = rep.code;
    const std::string text = rep.json.dump(2) + "\n";
    if (sink.enabled()) write_text(sink.path(name + ".json"), text);
    if (flags.json) {
      out << text;
    } else {
      for (const std::string& line : rep.lines) out << line << "\n";
    }
    return rep.code;
  } catch (...) {
    return exit_code_for_current_exception(err);
  }
}

}  // namespace affext
