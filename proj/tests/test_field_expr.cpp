#include <cmath>
#include <random>

#include "affext/errors.hpp"
#include "affext/expr.hpp"
#include "affext/field_set.hpp"
#include "doctest.h"
#include "support/generators.hpp"
#include "support/systems.hpp"

using namespace affext;

TEST_CASE("expression parsing and evaluation") {
  const SymbolTable sym = SymbolTable::state(3);
  const Expr e = parse_expression("2*x1^2 - sin(x2)*exp(x3) / 4 + cos(pi*x1)", sym);
  const double x[3] = {0.3, -1.2, 0.5};
  const double expect = 2 * 0.09 - std::sin(-1.2) * std::exp(0.5) / 4 + std::cos(M_PI * 0.3);
  CHECK(e.evaluate(x) == doctest::Approx(expect).epsilon(1e-15));
  CHECK(CompiledExpr(e)(x) == doctest::Approx(expect).epsilon(1e-15));

  CHECK(parse_expression("-x1^2", sym).evaluate(x) == doctest::Approx(-0.09));
  CHECK(parse_expression("2^3^2", sym).evaluate(x) == doctest::Approx(512.0));
  CHECK(parse_constant("1/(4*pi)") == doctest::Approx(1.0 / (4 * M_PI)));
  CHECK(parse_expression("1e-3 * x1", sym).evaluate(x) == doctest::Approx(3e-4));
}

TEST_CASE("parse errors carry kind and position") {
  const SymbolTable sym = SymbolTable::state(2);
  auto kind_of = [&](const char* text) {
    try {
      parse_expression(text, sym);
    } catch (const ParseError& e) {
      return e.kind();
    }
    FAIL("expected ParseError for " << text);
    return ParseError::Kind::Syntax;
  };
  CHECK(kind_of("y^2/2") == ParseError::Kind::UnknownSymbol);
  CHECK(kind_of("x3 + 1") == ParseError::Kind::IndexOutOfRange);
  CHECK(kind_of("x1 +") == ParseError::Kind::Syntax);
  CHECK(kind_of("(x1") == ParseError::Kind::Syntax);
  CHECK(kind_of("abs(x1)") == ParseError::Kind::Syntax);
  CHECK(kind_of("x1^x2") == ParseError::Kind::Syntax);
  try {
    parse_expression("x1 + * 2", sym);
  } catch (const ParseError& e) {
    CHECK(e.position() == 5);
  }
  CHECK(parse_expression("abs(x1)", sym, {.allow_abs = true}).uses_abs());
}

TEST_CASE("abs is evaluable but not differentiable") {
  const SymbolTable sym = SymbolTable::state(1);
  const Expr e = parse_expression("abs(x1^2 - 1)", sym, {.allow_abs = true});
  const double x[1] = {0.5};
  CHECK(e.evaluate(x) == doctest::Approx(0.75));
  CHECK_THROWS_AS(e.derivative(0), NonSmoothError);
}

TEST_CASE("printing round-trips through the parser") {
  std::mt19937_64 rng(7);
  const SymbolTable sym = SymbolTable::state(3);
  for (int t = 0; t < 50; ++t) {
    const Expr e = gen::smooth(rng, 3, 3);
    const Expr back = parse_expression(e.to_string(sym), sym);
    const Vector x = gen::point(rng, 3);
    CHECK(back.evaluate({x.data(), 3}) == doctest::Approx(e.evaluate({x.data(), 3})).epsilon(1e-12));
  }
}

TEST_CASE("parse_field_set examples") {
  const FieldSet h = sys::heisenberg();
  CHECK(h.dim() == 3);
  CHECK(h.count() == 2);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const Vector x = gen::point(rng, 3, 3.0);
    CHECK((eval_field(h, 0, x) - Vector{{1.0, 0.0, -x[1] / 2}}).norm() == 0.0);
    CHECK((eval_field(h, 1, x) - Vector{{0.0, 1.0, x[0] / 2}}).norm() == 0.0);
  }
  CHECK((eval_field(h, 0, Vector::Zero(3)) - Vector{{1, 0, 0}}).norm() == 0.0);
  CHECK((eval_field(h, 1, Vector{{2, 0, 0}}) - Vector{{0, 1, 1}}).norm() == 0.0);

  const FieldSet id = sys::identity();
  CHECK(id.constant_field(0));
  CHECK((eval_field(id, 1, Vector{{5, -3}}) - Vector{{0, 1}}).norm() == 0.0);

  CHECK_THROWS_AS(parse_field_set("X1 = (1, y^2/2)", 2, 1), ParseError);
  CHECK_THROWS_AS(parse_field_set("X1 = (1, x3)", 2, 1), ParseError);
  CHECK_THROWS_AS(parse_field_set("X1 = (1, 0)", 2, 2), ParseError);
  CHECK_THROWS_AS(parse_field_set("X1 = (1, 0); X1 = (0, 1)", 2, 2), ParseError);
  CHECK_THROWS_AS(parse_field_set("X3 = (1, 0)", 2, 2), ParseError);
  CHECK_THROWS_AS(parse_field_set("X1 = (1, 0, 0)", 2, 1), ParseError);
  CHECK_THROWS_AS(parse_field_set("X1 = (1); X2 = (1)", 1, 2), InvalidArgument);

  const FieldSet multi = parse_field_set("# comment\nX2 = (0,\n 1)\n\nX1 = (1, 0)\n", 2, 2);
  CHECK((eval_field(multi, 0, Vector::Zero(2)) - Vector{{1, 0}}).norm() == 0.0);
}

TEST_CASE("non-finite field values are rejected") {
  const FieldSet f = parse_field_set("X1 = (exp(x1))", 1, 1);
  CHECK_THROWS_AS(eval_field(f, 0, Vector{{1000.0}}), NonFiniteError);
}

TEST_CASE("jacobian examples") {
  const FieldSet id = sys::identity();
  CHECK(jacobian(id, 0, Vector{{1, 2}}).isZero(0.0));
  const FieldSet h = sys::heisenberg();
  Matrix j1 = Matrix::Zero(3, 3);
  j1(2, 1) = -0.5;
  Matrix j2 = Matrix::Zero(3, 3);
  j2(2, 0) = 0.5;
  CHECK((jacobian(h, 0, Vector{{0.3, 0.1, 2}}) - j1).norm() == 0.0);
  CHECK((jacobian(h, 1, Vector{{0.3, 0.1, 2}}) - j2).norm() == 0.0);
}

TEST_CASE("symbolic derivative matches central differences") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Field f;
    for (int j = 0; j < 3; ++j) f.push_back(gen::smooth(rng, 3, 2));
    const FieldSet fs(3, {f});
    for (int k = 0; k < 100; ++k) {
      const Vector x = gen::point(rng, 3);
      const Matrix jac = fs.jacobian(0, x);
      Matrix fd(3, 3);
      for (int c = 0; c < 3; ++c) {
        const double h = 1e-5 * (1 + std::abs(x[c]));
        Vector xp = x, xm = x;
        xp[c] += h;
        xm[c] -= h;
        fd.col(c) = (fs.eval(0, xp) - fs.eval(0, xm)) / (2 * h);
      }
      CHECK((jac - fd).norm() <= 1e-6 * (1 + jac.norm()));
    }
  }
}

TEST_CASE("lie bracket examples") {
  const FieldSet id = sys::identity();
  for (const Expr& c : lie_bracket(id.field(0), id.field(1))) CHECK(c.is_zero());

  const FieldSet h = sys::heisenberg();
  const Field b = lie_bracket(h.field(0), h.field(1));
  CHECK(b[0].is_zero());
  CHECK(b[1].is_zero());
  REQUIRE(b[2].is_constant());
  CHECK(b[2].value() == 1.0);

  const FieldSet g = sys::grushin();
  const Field gb = lie_bracket(g.field(0), g.field(1));
  CHECK(gb[0].is_zero());
  REQUIRE(gb[1].is_constant());
  CHECK(gb[1].value() == 1.0);

  const FieldSet mt = sys::martinet();
  const Field inner = lie_bracket(mt.field(1), mt.field(0));
  const Field outer = lie_bracket(mt.field(1), inner);
  CHECK((eval_field_expr(outer, Vector{{0.4, -0.2, 1.0}}) - Vector{{0, 0, 1}}).norm() == 0.0);
}

TEST_CASE("bracket node cap") {
  const FieldSet f = parse_field_set("X1 = (sin(x2)*exp(x1), cos(x1*x2)); X2 = (exp(sin(x1)), x1*x2^3)", 2, 2);
  CHECK_THROWS_AS(lie_bracket(f.field(0), f.field(1), 10), ExpressionGrowthError);
  CHECK_NOTHROW(lie_bracket(f.field(0), f.field(1)));
}

TEST_CASE("lie bracket antisymmetry and Jacobi identity") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + trial % 3;
    const Field a = gen::polynomial_field(rng, n);
    const Field b = gen::polynomial_field(rng, n);
    const Field c = gen::polynomial_field(rng, n);
    const Field ab = lie_bracket(a, b);
    const Field ba = lie_bracket(b, a);
    const Vector x = gen::point(rng, n);
    const Vector sum = eval_field_expr(ab, x) + eval_field_expr(ba, x);
    CHECK(sum.norm() == 0.0);
    const Vector jac = eval_field_expr(lie_bracket(a, lie_bracket(b, c)), x) +
                       eval_field_expr(lie_bracket(b, lie_bracket(c, a)), x) +
                       eval_field_expr(lie_bracket(c, lie_bracket(a, b)), x);
    CHECK(jac.norm() < 1e-10);
  }
}

TEST_CASE("lie rank examples") {
  auto check = [](const FieldSet& f, const Vector& x, std::size_t rank, std::size_t depth) {
    const LieRankResult r = lie_rank(f, x, 5);
    CHECK(r.rank == rank);
    CHECK(r.depth == depth);
    CHECK(r.full_rank);
    CHECK(r.basis.size() == rank);
  };
  check(sys::identity(), Vector{{0.7, -2.0}}, 2, 1);
  check(sys::heisenberg(), Vector::Zero(3), 3, 2);
  check(sys::martinet(), Vector::Zero(3), 3, 3);
  check(sys::grushin(), Vector::Zero(2), 2, 2);
  check(sys::grushin(), Vector{{1.0, 0.0}}, 2, 1);

  const LieRankResult partial = lie_rank(sys::martinet(), Vector::Zero(3), 2);
  CHECK_FALSE(partial.full_rank);
  CHECK(partial.rank == 2);
  CHECK(partial.message.find("unverified") != std::string::npos);

  CHECK_THROWS_AS(lie_rank(sys::heisenberg(), Vector::Zero(3), 0), InvalidArgument);
}

TEST_CASE("lie rank is monotone in depth") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3;
    std::vector<Field> fields = {gen::polynomial_field(rng, n), gen::polynomial_field(rng, n)};
    const FieldSet f(n, fields);
    const Vector x = gen::point(rng, n);
    std::size_t prev = 0;
    for (std::size_t d = 1; d <= 4; ++d) {
      const std::size_t r = lie_rank(f, x, d).rank;
      CHECK(r >= prev);
      CHECK(r <= n);
      prev = r;
    }
  }
}

TEST_CASE("bounded spot check") {
  CHECK(field_bound_spot_check(sys::identity(), 10.0, 50, 0) == doctest::Approx(1.0));
  CHECK(field_bound_spot_check(sys::heisenberg(), 10.0, 200, 0) > 2.0);
}
