#include <cmath>
#include <random>

#include "affext/analysis.hpp"
#include "affext/errors.hpp"
#include "doctest.h"
#include "support/generators.hpp"
#include "support/systems.hpp"

using namespace affext;

namespace {

ControlPath circle(std::size_t N) { return gen::circle_control(N); }

ExtremalSolution pseudo_extremal(const ControlPath& u, const Vector& x0) {
  ExtremalSolution s{u, Trajectory{}, Matrix(), Vector(), Vector(), 0.0, 0.0, {}, 0};
  s.xi.x0 = x0;
  return s;
}

std::vector<ExtremalSolution> straight_family(std::size_t N) {
  ShootOptions o;
  o.grid = N;
  return {shoot_extremal(sys::identity(), parse_lagrangian("(u1^2 + u2^2)/2", 2, 2), Vector::Zero(2),
                         Vector{{1.0, 0.0}}, 1.0, Vector::Zero(2), o)};
}

}  // namespace

TEST_CASE("singularity report examples") {
  const GramReport id = singularity_report(sys::identity(), circle(32), Vector::Zero(2), 1.0);
  CHECK_FALSE(id.singular);
  CHECK((id.gram - Matrix::Identity(2, 2)).norm() < 1e-12);
  CHECK(id.ratio == doctest::Approx(1.0));
  CHECK_FALSE(id.abnormal_candidate.has_value());

  const GramReport mart =
      singularity_report(sys::martinet(), ControlPath::constant(1.0, 32, Vector{{1.0, 0.0}}), Vector::Zero(3), 1.0);
  CHECK(mart.singular);
  CHECK(mart.ratio < 1e-8);
  REQUIRE(mart.abnormal_candidate.has_value());
  const Vector& c = *mart.abnormal_candidate;
  CHECK(std::acos(std::min(1.0, std::abs(c[2]))) < 1e-4);
  CHECK((mart.gram * c).norm() <= mart.sigma_min * (1.0 + 1e-8) + 1e-300);

  const GramReport heis = singularity_report(sys::heisenberg(), circle(64), Vector::Zero(3), 1.0);
  CHECK_FALSE(heis.singular);
  CHECK(heis.ratio > 1e-3);
  CHECK(heis.sigma_min <= heis.sigma_max);

  CHECK_THROWS_AS(singularity_report(sys::identity(), circle(8), Vector::Zero(2), 1.0, -1.0), InvalidArgument);
}

TEST_CASE("property: singularity ratio is stable under refinement") {
  struct Case {
    FieldSet F;
    Vector x0;
  };
  std::mt19937_64 rng(21);
  const std::vector<Case> cases = {{sys::identity(), Vector::Zero(2)},
                                   {sys::heisenberg(), Vector::Zero(3)},
                                   {sys::martinet(), Vector{{0.0, 0.3, 0.0}}},
                                   {sys::grushin(), Vector{{0.5, 0.0}}}};
  for (const Case& c : cases) {
    for (int t = 0; t < 5; ++t) {
      std::mt19937_64 r1(rng());
      std::mt19937_64 r2 = r1;
      const ControlPath a = gen::smooth_control(r1, 1.0, 64, 2, 1.0);
      const ControlPath b = gen::smooth_control(r2, 1.0, 128, 2, 1.0);
      const GramReport ga = singularity_report(c.F, a, c.x0, 1.0);
      const GramReport gb = singularity_report(c.F, b, c.x0, 1.0);
      CHECK(ga.singular == gb.singular);
      if (!ga.singular) CHECK(std::abs(ga.ratio - gb.ratio) < 0.1 * gb.ratio);
    }
  }
}

TEST_CASE("property: abnormal candidate annihilates the image of dE") {
  const FieldSet F = sys::martinet();
  std::mt19937_64 rng(8);
  for (double a : {1.0, -0.5, 2.0}) {
    const ControlPath u = ControlPath::constant(1.0, 32, Vector{{a, 0.0}});
    const GramReport g = singularity_report(F, u, Vector::Zero(3), 1.0);
    REQUIRE(g.singular);
    for (int t = 0; t < 20; ++t) {
      const ControlPath v = gen::smooth_control(rng, 1.0, 32, 2, 1.0);
      const Vector dv = apply_dE(F, u, Vector::Zero(3), 1.0, v);
      CHECK(std::abs(g.abnormal_candidate->dot(dv)) < 1e-6 * v.l2_norm());
    }
  }
}

TEST_CASE("assumption 4 check") {
  CHECK(assumption4_check(sys::identity(), straight_family(32)).clean());
  const Assumption4Report empty = assumption4_check(sys::identity(), {});
  CHECK(empty.clean());
  CHECK(empty.reports.empty());

  std::vector<ExtremalSolution> fam;
  fam.push_back(pseudo_extremal(circle(32), Vector::Zero(3)));
  fam.push_back(pseudo_extremal(ControlPath::constant(1.0, 32, Vector{{1.0, 0.0}}), Vector::Zero(3)));
  const Assumption4Report r = assumption4_check(sys::martinet(), fam);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0] == 1);
}

TEST_CASE("lipschitz certificate examples") {
  const auto line = straight_family(32);
  const auto line2 = straight_family(64);
  const LipschitzCertificate c = lipschitz_certificate(line, line2);
  CHECK(c.K_bound == doctest::Approx(1.0));
  CHECK(c.K_quotient < 1e-7);
  CHECK(c.K_final == doctest::Approx(1.0));
  CHECK(c.K_lip == doctest::Approx(1.0));
  CHECK(c.sup_phi == doctest::Approx(0.5));
  CHECK(c.grid_stability == doctest::Approx(1.0));
  CHECK(c.certified);

  ShootOptions o;
  const Lagrangian L = parse_lagrangian("(u1^2 + u2^2)/2", 2, 2);
  const std::vector<ExtremalSolution> zero = {
      shoot_extremal(sys::identity(), L, Vector::Zero(2), Vector::Zero(2), 1.0, Vector::Zero(2), o)};
  const LipschitzCertificate z = lipschitz_certificate(zero, zero);
  CHECK(z.sup_phi == 0.0);
  CHECK(z.K_bound == 0.0);
  CHECK(z.K_lip == 0.0);
  CHECK(z.grid_stability == 1.0);
  CHECK(z.certified);

  const LipschitzCertificate vac = lipschitz_certificate({}, {});
  CHECK(vac.certified);
  CHECK(vac.K_lip == 0.0);

  // A refinement that lost solutions cannot certify, nor can an unstable one.
  CHECK_FALSE(lipschitz_certificate(line, {}).certified);
  std::vector<ExtremalSolution> wild = line2;
  wild[0].u = ControlPath::from_function(1.0, 64, 2, [](double s) { return Vector{{1.0 + 10.0 * std::sin(40.0 * s), 0.0}}; });
  const LipschitzCertificate bad = lipschitz_certificate(line, wild);
  CHECK_FALSE(bad.chain.lipschitz_controls);
  CHECK_FALSE(bad.certified);
}

TEST_CASE("heisenberg family regularity is grid stable") {
  const FieldSet F = sys::heisenberg();
  const Lagrangian L = parse_lagrangian("(u1^2 + u2^2)/2", 3, 2);
  const Vector x{{0.0, 0.0, 1.0 / (4.0 * M_PI)}};
  ShootOptions o;
  o.grid = 64;
  o.integrator.substeps = 8;
  const MultiStartResult fam = multi_start(F, L, Vector::Zero(3), x, 1.0, default_seeds(3, 20, 1.0, 0), o);
  REQUIRE(fam.solutions.size() >= 2);
  const RefinedFamily ref = refine_family(F, L, x, fam.solutions, o);
  CHECK(ref.lost.empty());
  const LipschitzCertificate c = lipschitz_certificate(fam.solutions, ref.solutions);
  CHECK(std::isfinite(c.K_bound));
  CHECK(std::isfinite(c.K_lip));
  CHECK(std::abs(c.grid_stability - 1.0) < 0.05);
  CHECK(c.chain.bounded_cost);
  CHECK(c.chain.bounded_controls);
  CHECK(c.chain.lipschitz_controls);
  CHECK(c.certified);

  const CostateBoundReport r = costate_bound_check(fam.solutions, ref.solutions);
  CHECK(r.finite);
  CHECK(r.relative_change < 0.02);
  CHECK(assumption4_check(F, fam.solutions).clean());
}

TEST_CASE("costate bound examples") {
  const CostateBoundReport line = costate_bound_check(straight_family(32));
  CHECK(line.R_traj == doctest::Approx(1.0));
  CHECK(line.R_costate == doctest::Approx(1.0));
  CHECK(line.relative_change == 0.0);

  const Lagrangian L = parse_lagrangian("(u1^2 + u2^2)/2", 2, 2);
  const Vector x0{{0.3, -0.4}};
  const std::vector<ExtremalSolution> zero = {shoot_extremal(sys::identity(), L, x0, x0, 1.0, Vector::Zero(2))};
  const CostateBoundReport z = costate_bound_check(zero, zero);
  CHECK(z.R_traj == doctest::Approx(0.5));
  CHECK(z.R_costate == 0.0);
  CHECK(z.relative_change == 0.0);
}
