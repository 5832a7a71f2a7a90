#include <cmath>
#include <random>

#include "affext/errors.hpp"
#include "affext/lagrangian.hpp"
#include "doctest.h"
#include "support/generators.hpp"
#include "support/systems.hpp"

using namespace affext;

namespace {

double bisect(const std::function<double(double)>& f, double lo, double hi) {
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(lo) * f(mid) <= 0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

FieldSet line() { return parse_field_set("X1 = (1)", 1, 1); }

ControlPath tent(std::size_t N, double sign) {
  return ControlPath::from_function(2.0, N, 1, [sign](double s) { return Vector{{s < 1.0 ? sign : -sign}}; },
                                    ControlPath::Interpolation::Hold);
}

}  // namespace

TEST_CASE("derivative examples") {
  const Lagrangian kin = parse_lagrangian("(u1^2 + u2^2)/2", 2, 2);
  const Vector x{{0.3, -0.4}}, u{{1.5, -2.0}};
  CHECK((kin.d_u(x, u) - u).norm() == 0.0);
  CHECK((kin.d2_u(x, u) - Matrix::Identity(2, 2)).norm() == 0.0);

  const Lagrangian lin = parse_lagrangian("(u1^2 + u2^2)/2 + 3*x1 - 2*x2", 2, 2);
  CHECK((lin.d_x(x, u) - Vector{{3.0, -2.0}}).norm() == 0.0);

  const Lagrangian gl = parse_lagrangian("(x1^2 - 1)^2 + (u1^2 - 1)^2", 1, 1);
  for (double v : {-1.3, 0.0, 0.4, 2.0}) {
    CHECK(gl.d_u(Vector{{0.2}}, Vector{{v}})[0] == doctest::Approx(4 * v * (v * v - 1)));
    CHECK(gl.d_x(Vector{{v}}, Vector{{0.2}})[0] == doctest::Approx(4 * v * (v * v - 1)));
  }
  CHECK(gl.eval(Vector{{0.0}}, Vector{{0.0}}) == doctest::Approx(2.0));
}

TEST_CASE("non-smooth Lagrangians evaluate but refuse derivatives") {
  const Lagrangian L = parse_lagrangian("(x1^2-1)^2 + abs(u1^2-1)", 1, 1, true);
  CHECK_FALSE(L.smooth());
  CHECK(L.eval(Vector{{0.0}}, Vector{{0.0}}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(L.d_u(Vector{{0.0}}, Vector{{0.0}}), NonSmoothError);
  CHECK_THROWS_AS(legendre_inverse(L, Vector{{0.0}}, Vector{{0.0}}, Vector{{0.0}}), NonSmoothError);
  CHECK_THROWS_AS(parse_lagrangian("abs(u1)", 1, 1), ParseError);
}

TEST_CASE("legendre inverse examples") {
  const Lagrangian kin = parse_lagrangian("(u1^2 + u2^2)/2", 2, 2);
  const Vector z{{0.7, -1.1}};
  CHECK((legendre_inverse(kin, Vector::Zero(2), z, Vector::Zero(2)) - z).norm() < 1e-14);
  const Lagrangian lin = parse_lagrangian("(u1^2 + u2^2)/2 + 3*x1 - 2*x2", 2, 2);
  CHECK((legendre_inverse(lin, Vector{{4, 5}}, z, Vector::Zero(2)) - z).norm() < 1e-14);

  const Lagrangian quart = parse_lagrangian("u1^2 + u1^4/4", 1, 1);
  const double root = bisect([](double u) { return 2 * u + u * u * u - 2; }, 0.0, 1.0);
  CHECK(std::abs(legendre_inverse(quart, Vector{{0.0}}, Vector{{2.0}}, Vector{{0.0}})[0] - root) < 1e-12);
}

TEST_CASE("legendre inverse reports diffeomorphism failure") {
  const Lagrangian bad = parse_lagrangian("cos(u1)", 1, 1);
  CHECK_THROWS_AS(legendre_inverse(bad, Vector{{0.0}}, Vector{{2.0}}, Vector{{0.3}}), DiffeomorphismError);
  const Lagrangian flat = parse_lagrangian("u1^3", 1, 1);
  CHECK_THROWS_AS(legendre_inverse(flat, Vector{{0.0}}, Vector{{1.0}}, Vector{{0.0}}), DiffeomorphismError);
}

TEST_CASE("legendre round trip on example Lagrangians") {
  struct Case {
    const char* text;
    std::size_t n, m;
  };
  const Case cases[] = {
      {"(u1^2 + u2^2)/2", 2, 2},
      {"(u1^2 + u2^2)/2 + 3*x1 - 2*x2", 2, 2},
      {"u1^2 + u1^4/4", 1, 1},
      {"(u1^2 + u2^2)/2 + (u1^4 + u2^4)/4 + x1*u2 + x3^2*u1", 3, 2},
      {"exp(u1) + u1^2/2 + x1^2*u1", 1, 1},
  };
  std::mt19937_64 rng(31);
  for (const Case& c : cases) {
    const Lagrangian L = parse_lagrangian(c.text, c.n, c.m);
    for (int t = 0; t < 100; ++t) {
      const Vector x = gen::point(rng, c.n, 2.0);
      const Vector z = gen::point(rng, c.m, 3.0);
      const Vector w = legendre_inverse(L, x, z, Vector::Zero(static_cast<Eigen::Index>(c.m)));
      CHECK((L.d_u(x, w) - z).norm() < 1e-10);
    }
  }
}

TEST_CASE("hamiltonian examples") {
  const Lagrangian kin2 = parse_lagrangian("(u1^2 + u2^2)/2", 2, 2);
  const FieldSet id = sys::identity();
  const Vector p{{0.6, -1.7}};
  CHECK(hamiltonian(kin2, id, Vector{{1, 1}}, p).H == doctest::Approx(p.squaredNorm() / 2));
  CHECK(hamiltonian(kin2, id, Vector{{1, 1}}, Vector::Zero(2)).H == 0.0);

  const Lagrangian kin3 = parse_lagrangian("(u1^2 + u2^2)/2", 3, 2);
  const HamiltonianValue hv = hamiltonian(kin3, sys::heisenberg(), Vector::Zero(3), Vector{{0, 0, 1}});
  CHECK(hv.Z.norm() == 0.0);
  CHECK(hv.H == 0.0);

  std::mt19937_64 rng(2);
  const FieldSet h = sys::heisenberg();
  for (int t = 0; t < 20; ++t) {
    const Vector x = gen::point(rng, 3), q = gen::point(rng, 3);
    const Vector Z = momentum(h, x, q);
    CHECK(hamiltonian(kin3, h, x, q).H == doctest::Approx(Z.squaredNorm() / 2).epsilon(1e-12));
  }
}

TEST_CASE("hamiltonian stationarity") {
  const Lagrangian L = parse_lagrangian("(u1^2 + u2^2)/2 + (u1^4 + u2^4)/4 + x1*u2 + x3^2*u1", 3, 2);
  const FieldSet h = sys::heisenberg();
  std::mt19937_64 rng(17);
  for (int t = 0; t < 100; ++t) {
    const Vector x = gen::point(rng, 3, 2.0), p = gen::point(rng, 3, 2.0);
    const HamiltonianValue hv = hamiltonian(L, h, x, p);
    CHECK((hv.Z - L.d_u(x, hv.w)).norm() < 1e-9);
    // Staticization: H = sup over u of (Z.u - L) for a fiber-convex L.
    for (int k = 0; k < 5; ++k) {
      const Vector u = hv.w + gen::point(rng, 2, 0.5);
      CHECK(hv.Z.dot(u) - L.eval(x, u) <= hv.H + 1e-12);
    }
  }
}

TEST_CASE("GL functional values") {
  const FieldSet F = line();
  const Lagrangian L = parse_lagrangian("(x1^2 - 1)^2 + abs(u1^2 - 1)", 1, 1, true);
  const Vector x0 = Vector::Zero(1);
  CHECK(std::abs(phi_functional(L, F, ControlPath::zero(2.0, 2000, 1), x0, 2.0) - 4.0) < 1e-6);
  CHECK(std::abs(phi_functional(L, F, tent(2000, 1.0), x0, 2.0) - 16.0 / 15.0) < 1e-6);
  CHECK(std::abs(phi_functional(L, F, tent(2000, -1.0), x0, 2.0) - 16.0 / 15.0) < 1e-6);

  const Lagrangian kin = parse_lagrangian("(u1^2 + u2^2)/2", 2, 2);
  CHECK(phi_functional(kin, sys::identity(), ControlPath::constant(1.0, 10, Vector{{1, 0}}), Vector::Zero(2), 1.0) ==
        doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("GL quadrature converges at second order") {
  const FieldSet F = line();
  const Lagrangian L = parse_lagrangian("(x1^2 - 1)^2 + abs(u1^2 - 1)", 1, 1, true);
  double prev = 0.0;
  for (std::size_t N : {10, 20, 40, 80}) {
    const double err = std::abs(phi_functional(L, F, tent(N, 1.0), Vector::Zero(1), 2.0, {.substeps = 1}) - 16.0 / 15.0);
    if (prev > 0.0) CHECK(prev / err > 3.5);
    prev = err;
  }
}

TEST_CASE("growth spot check examples") {
  const SampleBox box{};
  const Lagrangian kin = parse_lagrangian("(u1^2 + u2^2)/2", 2, 2);
  const GrowthReport a = growth_spot_check(kin, parse_growth_profile("r^2/2", "0", "1"), box, 500);
  CHECK(a.ok);
  CHECK(a.lower_margin >= -1e-12);
  CHECK(a.gradient_margin >= 0.0);

  const Lagrangian neg = parse_lagrangian("(u1^2 + u2^2)/2 - (x1^2 + x2^2)", 2, 2);
  const GrowthReport b = growth_spot_check(neg, parse_growth_profile("r^2/2", "r^2", "2*r + 1"), box, 500);
  CHECK(b.ok);
  CHECK(b.lower_margin >= -1e-12);

  const Lagrangian bad = parse_lagrangian("-(u1^2 + u2^2)", 2, 2);
  const GrowthReport c = growth_spot_check(bad, parse_growth_profile("r^2/2", "0", "1"), box, 100);
  CHECK_FALSE(c.ok);
  CHECK(c.violations == 100);
  CHECK(c.lower_margin < 0.0);
  CHECK(c.worst_lower_u.norm() > 0.0);
}
