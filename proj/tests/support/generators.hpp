#pragma once

// Hand-rolled random generators for property tests.

#include <cstdint>
#include <random>

#include "affext/expr.hpp"
#include "affext/field_set.hpp"
#include "affext/linalg.hpp"

namespace gen {

inline affext::Vector point(std::mt19937_64& rng, std::size_t n, double radius = 1.0) {
  std::uniform_real_distribution<double> d(-radius, radius);
  affext::Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = d(rng);
  return x;
}

/// Random polynomial in x1..xn with at most `terms` monomials of degree <= `degree`.
inline affext::Expr polynomial(std::mt19937_64& rng, std::size_t n, int degree, int terms) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_int_distribution<int> deg(0, degree);
  std::uniform_int_distribution<std::size_t> var(0, n - 1);
  affext::Expr out;
  for (int t = 0; t < terms; ++t) {
    affext::Expr mono(coef(rng));
    const int d = deg(rng);
    for (int k = 0; k < d; ++k) mono = mono * affext::Expr::variable(var(rng));
    out = out + mono;
  }
  return out;
}

/// Random smooth expression mixing polynomials with sin, cos and exp.
inline affext::Expr smooth(std::mt19937_64& rng, std::size_t n, int depth) {
  std::uniform_int_distribution<int> pick(0, 5);
  if (depth == 0) return polynomial(rng, n, 2, 2);
  const affext::Expr a = smooth(rng, n, depth - 1);
  switch (pick(rng)) {
    case 0: return a + smooth(rng, n, depth - 1);
    case 1: return a * smooth(rng, n, depth - 1);
    case 2: return affext::sin(a);
    case 3: return affext::cos(a);
    case 4: return affext::exp(0.3 * a);
    default: return affext::pow(a, 2.0);
  }
}

inline affext::Field polynomial_field(std::mt19937_64& rng, std::size_t n, int degree = 2) {
  affext::Field f;
  for (std::size_t j = 0; j < n; ++j) f.push_back(polynomial(rng, n, degree, 3));
  return f;
}

}  // namespace gen

#include "affext/control_path.hpp"

namespace gen {

/// Smooth random control a + b cos(2 pi s / T) + c sin(2 pi s / T) per channel.
inline affext::ControlPath smooth_control(std::mt19937_64& rng, double T, std::size_t N, std::size_t m,
                                          double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  affext::Matrix c(3, static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = d(rng);
  return affext::ControlPath::from_function(T, N, m, [&](double s) {
    const double w = 2.0 * M_PI * s / T;
    affext::Vector u(static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = c(0, i) + c(1, i) * std::cos(w) + c(2, i) * std::sin(w);
    return u;
  });
}

inline affext::ControlPath circle_control(std::size_t N) {
  return affext::ControlPath::from_function(1.0, N, 2, [](double s) {
    return affext::Vector{{std::cos(2 * M_PI * s), std::sin(2 * M_PI * s)}};
  });
}

}  // namespace gen
