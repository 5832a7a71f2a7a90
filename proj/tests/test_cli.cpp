#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "affext/cli.hpp"
#include "affext/errors.hpp"
#include "affext/io.hpp"
#include "affext/scenario.hpp"
#include "doctest.h"

using namespace affext;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = AFFEXT_SCENARIO_DIR;

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int code = run(args, o, e);
  return {code, o.str(), e.str()};
}

std::string scenario(const std::string& name) { return (kScenarios / (name + ".scn")).string(); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("affext_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string read(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream b;
  b << f.rdbuf();
  return b.str();
}

}  // namespace

TEST_CASE("scenario parsing") {
  const Scenario s = parse_scenario(R"(
# comment
name = t
n = 3
m = 2
fields = <<
X1 = (1, 0, -x2/2)   # trailing comment
X2 = (0, 1, x1/2)
>>
x0 = 0, 0, 0
target = 0, 0, 1/(4*pi)
T = 2
grid = 16
seed = 7
anchor_times = 0.5, 1
)");
  CHECK(s.name == "t");
  CHECK(s.fields().count() == 2);
  CHECK(s.target[2] == doctest::Approx(1.0 / (4.0 * M_PI)));
  CHECK(s.T == 2.0);
  CHECK(s.grid == 16);
  CHECK(s.seed == 7);
  CHECK(s.anchor_times.size() == 2);
  CHECK_FALSE(s.has_lagrangian());
  CHECK(s.control().sup_norm() == 0.0);

  const std::string base = "n = 2\nm = 2\nfields = X1 = (1, 0); X2 = (0, 1)\nx0 = 0, 0\n";
  CHECK_NOTHROW(parse_scenario(base));
  CHECK_THROWS_AS(parse_scenario(base + "x0 = 1, 1\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario(base + "colour = red\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario(base + "just words\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario(base + "control = <<\n1, 0\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario(base + "T = 0\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_scenario(base + "grid = 0\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_scenario(base + "grid = 2.5\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_scenario(base + "target = 1, 2, 3\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_scenario(base + "control = 1\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_scenario(base + "lagrangian = u3^2\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("n = 2\nm = 3\nfields = X1 = (1, 0)\nx0 = 0, 0\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_scenario("n = 2\nm = 2\nx0 = 0, 0\n"), InvalidArgument);
  CHECK_THROWS_AS(load_scenario("/nonexistent/file.scn"), InvalidArgument);
}

TEST_CASE("every shipped scenario loads") {
  for (const char* name : {"identity", "heisenberg", "martinet", "grushin", "gl"}) {
    CAPTURE(name);
    const Scenario s = load_scenario(scenario(name));
    CHECK(s.name == name);
  }
}

TEST_CASE("control csv round trip") {
  const ControlPath u = ControlPath::from_function(1.5, 12, 2, [](double s) { return Vector{{std::sin(s), 1.0 / 3.0}}; });
  const fs::path dir = scratch("csv");
  write_text(dir / "u.csv", control_csv(u));
  const ControlPath v = read_control_csv(dir / "u.csv");
  CHECK(v.horizon() == u.horizon());
  CHECK(v.values() == u.values());
  CHECK(control_csv(u).substr(0, 8) == "s,u1,u2\n");
  write_text(dir / "bad.csv", "s,u1\n0,1\n0.7,1\n2,1\n");
  CHECK_THROWS_AS(read_control_csv(dir / "bad.csv"), InvalidArgument);
}

TEST_CASE("gl-values reproduces the reference costs") {
  const Run r = cli({"gl-values", "--scenario", scenario("gl"), "--json"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(std::abs(j["phi_zero"].get<double>() - 4.0) < 1e-6);
  CHECK(std::abs(j["phi_plus"].get<double>() - 16.0 / 15.0) < 1e-6);
  CHECK(std::abs(j["phi_minus"].get<double>() - 16.0 / 15.0) < 1e-6);
  CHECK(cli({"gl-values", "--scenario", scenario("identity")}).code == kExitValidation);
}

TEST_CASE("simulate with the zero control keeps x0") {
  const fs::path dir = scratch("sim");
  const std::string text = "name = still\nn = 2\nm = 2\nfields = X1 = (1, 0); X2 = (0, 1)\nx0 = 0.25, -1\n";
  write_text(dir / "still.scn", text);
  const Run r = cli({"simulate", "--scenario", (dir / "still.scn").string(), "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  std::istringstream csv(read(dir / "out" / "trajectory.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "s,x1,x2");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    CHECK(line.substr(line.find(',')) == ",0.25,-1");
    ++rows;
  }
  CHECK(rows == 32 * 4 + 1);
  CHECK(fs::exists(dir / "out" / "simulate.json"));
}

TEST_CASE("lie-rank and check-singular") {
  const auto rank = [](const std::string& s) {
    const Run r = cli({"lie-rank", "--scenario", scenario(s), "--json"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out)["result"];
    return std::make_pair(j["rank"].get<int>(), j["depth"].get<int>());
  };
  CHECK(rank("identity") == std::make_pair(2, 1));
  CHECK(rank("heisenberg") == std::make_pair(3, 2));
  CHECK(rank("martinet") == std::make_pair(3, 3));
  CHECK(rank("grushin") == std::make_pair(2, 2));

  const auto m = nlohmann::json::parse(cli({"check-singular", "--scenario", scenario("martinet"), "--json"}).out);
  CHECK(m["report"]["singular"].get<bool>());
  const auto h = nlohmann::json::parse(cli({"check-singular", "--scenario", scenario("heisenberg"), "--json"}).out);
  CHECK_FALSE(h["report"]["singular"].get<bool>());
}

TEST_CASE("solve-extremal on heisenberg") {
  const fs::path dir = scratch("solve");
  const Run r = cli({"solve-extremal", "--scenario", scenario("heisenberg"), "--json", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  REQUIRE(j["solutions"].size() >= 1);
  for (const auto& s : j["solutions"]) {
    CHECK(s["residuals"]["endpoint_gap"].get<double>() < 1e-8);
    CHECK(s["residuals"]["hamiltonian_drift"].get<double>() < 1e-6);
  }
  CHECK(fs::exists(dir / "control_0.csv"));
  CHECK(fs::exists(dir / "costate_0.csv"));
  CHECK(read(dir / "solve-extremal.json") == r.out);
}

TEST_CASE("reports are byte-identical for identical seeds") {
  for (const char* cmd : {"solve-extremal", "certify-lipschitz", "endpoint-jacobian"}) {
    CAPTURE(cmd);
    const Run a = cli({cmd, "--scenario", scenario("grushin"), "--json", "--seed", "3"});
    const Run b = cli({cmd, "--scenario", scenario("grushin"), "--json", "--seed", "3"});
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
  }
}

TEST_CASE("chart build and evaluation through files") {
  const fs::path dir = scratch("chart");
  const Run b = cli({"build-chart", "--scenario", scenario("grushin"), "--anchor-time", "0.8", "--out", dir.string(),
                     "--json"});
  REQUIRE(b.code == 0);
  const auto bj = nlohmann::json::parse(b.out);
  REQUIRE(bj["charts"].size() == 1);
  CHECK(bj["charts"][0]["round_trip"]["max_residual"].get<double>() < 1e-7);
  const std::string chart = (dir / "chart_0.json").string();

  const Run e = cli({"eval-chart", "--scenario", scenario("grushin"), "--chart", chart, "--json"});
  REQUIRE(e.code == 0);
  const auto ej = nlohmann::json::parse(e.out);
  CHECK(ej["iterations"].get<int>() == 0);
  CHECK(ej["residual"].get<double>() == 0.0);

  const auto beta0 = bj["charts"][0]["beta0"];
  const double r = bj["charts"][0]["r"].get<double>();
  const std::string beta = std::to_string(beta0[0].get<double>() + 0.3 * r) + "," +
                           std::to_string(beta0[1].get<double>() - 0.2 * r);
  const Run e2 = cli({"eval-chart", "--scenario", scenario("grushin"), "--chart", chart, "--s", "0.82", "--beta", beta,
                      "--json", "--out", (dir / "eval").string()});
  REQUIRE(e2.code == 0);
  CHECK(nlohmann::json::parse(e2.out)["residual"].get<double>() < 1e-8);
  CHECK(fs::exists(dir / "eval" / "chart_control.csv"));

  CHECK(cli({"eval-chart", "--scenario", scenario("grushin"), "--chart", chart, "--beta", "50, 50"}).code ==
        kExitValidation);
  CHECK(cli({"eval-chart", "--scenario", scenario("grushin")}).code == kExitValidation);
}

TEST_CASE("exit codes") {
  CHECK(cli({}).code == kExitValidation);
  CHECK(cli({"bogus"}).code == kExitValidation);
  CHECK(cli({"simulate"}).code == kExitValidation);
  CHECK(cli({"simulate", "--scenario", "/nonexistent.scn"}).code == kExitValidation);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"solve-extremal", "--scenario", scenario("gl")}).code == kExitValidation);

  const fs::path dir = scratch("codes");
  // Martinet at u = (1, 0) is singular, so no chart basis exists.
  write_text(dir / "sing.scn", read(scenario("martinet")) + "chart_probes = 2\n");
  std::string text = read(dir / "sing.scn");
  text.replace(text.find("anchor_times = 1"), 16, "anchor = control");
  write_text(dir / "sing.scn", text);
  CHECK(cli({"build-chart", "--scenario", (dir / "sing.scn").string()}).code == kExitCertificate);

  write_text(dir / "stuck.scn", read(scenario("identity")) + "max_iter = 0\n");
  std::string stuck = read(dir / "stuck.scn");
  stuck.replace(stuck.find("target = 1, 0"), 13, "target = 3, 2");
  write_text(dir / "stuck.scn", stuck);
  CHECK(cli({"solve-extremal", "--scenario", (dir / "stuck.scn").string()}).code == kExitNonConvergence);

  write_text(dir / "shallow.scn", read(scenario("martinet")) + "");
  std::string shallow = read(dir / "shallow.scn");
  shallow.replace(shallow.find("lie_depth = 3"), 13, "lie_depth = 2");
  write_text(dir / "shallow.scn", shallow);
  CHECK(cli({"lie-rank", "--scenario", (dir / "shallow.scn").string()}).code == kExitCertificate);
}
