#include <gtest/gtest.h>

#include <cmath>

#include "tnqg/quadrature.hpp"

using namespace tnqg;

TEST(Simpson, ExactForCubics) {
  const QuadratureGrid g(0.2, 1.7, 9);
  auto f = [](double t) { return 2.0 - 3.0 * t + 0.5 * t * t + 1.25 * t * t * t; };
  auto antiderivative = [](double t) { return 2.0 * t - 1.5 * t * t + t * t * t / 6.0 + 0.3125 * t * t * t * t; };
  EXPECT_NEAR(g.integrate(f), antiderivative(1.7) - antiderivative(0.2), 1e-14);
  EXPECT_DOUBLE_EQ(g.points().front(), 0.2);
  EXPECT_DOUBLE_EQ(g.points().back(), 1.7);
}

TEST(Simpson, FourthOrderConvergence) {
  double previous = 0.0;
  for (std::size_t n : {5u, 9u, 17u, 33u}) {
    const QuadratureGrid g(0.0, 2.0, n);
    const double err = std::abs(g.integrate([](double t) { return std::exp(std::sin(3 * t)); }) - 2.5693643843610996);
    if (previous > 0) {
      EXPECT_GT(previous / err, 12.0) << n;
    }
    previous = err;
  }
}

TEST(Simpson, RejectsBadGrids) {
  EXPECT_THROW(QuadratureGrid(0, 1, 4), InvalidArgument);
  EXPECT_THROW(QuadratureGrid(0, 1, 1), InvalidArgument);
  EXPECT_THROW(QuadratureGrid(1, 0, 5), InvalidArgument);
  const QuadratureGrid g(0, 1, 5);
  EXPECT_THROW(g.integrate_values(std::vector<double>(4, 1.0)), InvalidArgument);
}

TEST(CumulativeSimpson, MatchesAntiderivative) {
  const std::size_t n = 21;
  const double h = 0.05;
  std::vector<double> v(n);
  for (std::size_t j = 0; j < n; ++j) v[j] = std::cos(static_cast<double>(j) * h);
  const auto c = cumulative_simpson(v, h);
  EXPECT_EQ(c[0], 0.0);
  for (std::size_t j = 1; j < n; ++j) EXPECT_NEAR(c[j], std::sin(static_cast<double>(j) * h), 2e-6) << j;
  // Even points reproduce the full Simpson rule.
  const QuadratureGrid g(0.0, h * static_cast<double>(n - 1), n);
  EXPECT_NEAR(c[n - 1], g.integrate_values(v), 1e-15);
}
