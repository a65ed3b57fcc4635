#include "kdvbs/mesh.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

namespace kdvbs {
namespace {

std::vector<double> sample(const IntervalGrid& g, double (*f)(double)) {
  std::vector<double> s(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) s[i] = f(g.node(i));
  return s;
}

TEST(IntervalGrid, UnitGridNodes) {
  const auto g = build_interval_grid(1.0, 5);
  const std::vector<double> expected{0.0, 0.25, 0.5, 0.75, 1.0};
  ASSERT_EQ(g.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(g.node(i), expected[i]);
}

TEST(IntervalGrid, LastNodeIsLengthExactly) {
  const double L = 2.0 * std::numbers::pi;
  const auto g = build_interval_grid(L, 101);
  EXPECT_EQ(g.node(100), L);
  EXPECT_EQ(g.node(0), 0.0);
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    EXPECT_NEAR(g.node(i + 1) - g.node(i), g.spacing(), 1e-14);
  }
}

TEST(IntervalGrid, RejectsBadArguments) {
  EXPECT_THROW(build_interval_grid(1.0, 3), InvalidArgument);
  EXPECT_THROW(build_interval_grid(0.0, 11), InvalidArgument);
  EXPECT_THROW(build_interval_grid(-1.0, 11), InvalidArgument);
}

TEST(TriangleGrid, CountsAndIndexing) {
  const TriangleGrid tri(build_interval_grid(1.0, 9));
  EXPECT_EQ(tri.size(), 9u * 10u / 2u);
  std::vector<int> seen(tri.size(), 0);
  std::size_t diag = 0, edge = 0;
  tri.for_each_node([&](std::size_t i, std::size_t j) {
    ++seen[tri.index(i, j)];
    diag += tri.is_diagonal(i, j);
    edge += tri.is_top_edge(i, j);
  });
  for (int c : seen) EXPECT_EQ(c, 1);
  EXPECT_EQ(diag, 9u);
  EXPECT_EQ(edge, 9u);
  EXPECT_THROW(tri.index(3, 2), InvalidArgument);
}

TEST(Quadrature, WeightsSumToLength) {
  for (double L : {1.0, 2.0 * std::numbers::pi, 0.3}) {
    const auto rule = trapezoid_rule(build_interval_grid(L, 37));
    double s = 0.0;
    for (double w : rule.weights) s += w;
    EXPECT_NEAR(s, L, 1e-12 * L);
  }
}

TEST(Integrate, ExactForConstantsAndLinears) {
  const auto g = build_interval_grid(1.0, 11);
  EXPECT_DOUBLE_EQ(integrate(g, std::vector<double>(11, 1.0)), 1.0);
  EXPECT_NEAR(integrate(g, g.nodes()), 0.5, 1e-15);
  // tail integral of x over [0.3, 1]
  EXPECT_NEAR(integrate(g, g.nodes(), 3), 0.5 * (1.0 - 0.09), 1e-15);
  EXPECT_EQ(integrate(g, g.nodes(), 10), 0.0);
}

TEST(Integrate, HandTrapezoidForSquare) {
  // nodes 0, 1/4, 1/2, 3/4, 1: (1/4)(0/2 + 1/16 + 1/4 + 9/16 + 1/2) = 11/32
  const auto g = build_interval_grid(1.0, 5);
  EXPECT_DOUBLE_EQ(integrate(g, sample(g, [](double x) { return x * x; })), 11.0 / 32.0);
}

TEST(Integrate, RejectsLengthMismatch) {
  const auto g = build_interval_grid(1.0, 11);
  EXPECT_THROW(integrate(g, std::vector<double>(10, 1.0)), InvalidArgument);
  EXPECT_THROW(integrate(g, std::vector<double>(11, 1.0), 11), InvalidArgument);
}

TEST(Integrate, RandomLinearFunctionsExact) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double L = 0.5 + std::abs(U(rng));
    const std::size_t n = 5 + static_cast<std::size_t>(trial);
    const auto g = build_interval_grid(L, n);
    const double a = U(rng), b = U(rng);
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = a + b * g.node(i);
    const double exact = a * L + 0.5 * b * L * L;
    EXPECT_NEAR(integrate(g, s), exact, 1e-12 * std::max(1.0, std::abs(exact)));
  }
}

TEST(Integrate, SecondOrderRefinement) {
  const double L = std::numbers::pi;
  double prev = 0.0;
  for (std::size_t n : {11u, 21u, 41u, 81u}) {
    const auto g = build_interval_grid(L, n);
    const double err = std::abs(integrate(g, sample(g, [](double x) { return std::sin(x); })) - 2.0);
    if (prev > 0.0) {
      EXPECT_NEAR(prev / err, 4.0, 0.1);
    }
    prev = err;
  }
}

TEST(FdWeights, ClassicStencils) {
  const std::vector<double> c3{-1.0, 0.0, 1.0};
  const auto w = fd_weights(0.0, c3, 1);
  EXPECT_NEAR(w[0], -0.5, 1e-15);
  EXPECT_NEAR(w[1], 0.0, 1e-15);
  EXPECT_NEAR(w[2], 0.5, 1e-15);
  const std::vector<double> fwd{0.0, 1.0, 2.0, 3.0, 4.0};
  const auto w3 = fd_weights(0.0, fwd, 3);
  const std::vector<double> expected{-2.5, 9.0, -12.0, 7.0, -1.5};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(w3[i], expected[i], 1e-13);
}

TEST(DerivativeSamples, QuadraticSecondDerivative) {
  const auto g = build_interval_grid(1.0, 21);
  const auto d2 = derivative_samples(g, sample(g, [](double x) { return x * x; }), 2);
  for (double v : d2) EXPECT_NEAR(v, 2.0, 1e-8);
}

TEST(DerivativeSamples, ConstantsHaveZeroDerivatives) {
  const auto g = build_interval_grid(2.0, 15);
  const std::vector<double> c(15, 3.7);
  for (int order = 1; order <= 3; ++order) {
    for (double v : derivative_samples(g, c, order)) EXPECT_NEAR(v, 0.0, 1e-8);
  }
}

TEST(DerivativeSamples, ThirdDerivativeOfSineSecondOrder) {
  // Leading error of the centered 5-point third difference is (h^2/4) f^(5),
  // and |f^(5)| = |cos| <= 1 here.
  const double L = 2.0 * std::numbers::pi;
  const auto g = build_interval_grid(L, 201);
  const auto d3 = derivative_samples(g, sample(g, [](double x) { return std::sin(x); }), 3);
  const double h = g.spacing();
  double interior_err = 0.0;
  for (std::size_t i = 2; i + 2 < g.size(); ++i) {
    interior_err = std::max(interior_err, std::abs(d3[i] + std::cos(g.node(i))));
  }
  EXPECT_LE(interior_err, 0.26 * h * h);
  double boundary_err = 0.0;
  for (std::size_t i : {0u, 1u, 199u, 200u}) {
    boundary_err = std::max(boundary_err, std::abs(d3[i] + std::cos(g.node(i))));
  }
  EXPECT_LE(boundary_err, 2.0 * h * h);
}

TEST(DerivativeSamples, Linearity) {
  std::mt19937 rng(11);
  std::normal_distribution<double> N01;
  const auto g = build_interval_grid(1.3, 33);
  std::vector<double> f(33), q(33), mix(33);
  for (std::size_t i = 0; i < 33; ++i) {
    f[i] = N01(rng);
    q[i] = N01(rng);
    mix[i] = 2.5 * f[i] - 0.75 * q[i];
  }
  for (int order = 1; order <= 3; ++order) {
    const auto df = derivative_samples(g, f, order);
    const auto dq = derivative_samples(g, q, order);
    const auto dm = derivative_samples(g, mix, order);
    for (std::size_t i = 0; i < 33; ++i) {
      const double scale = std::abs(2.5 * df[i]) + std::abs(0.75 * dq[i]) + 1.0;
      EXPECT_NEAR(dm[i], 2.5 * df[i] - 0.75 * dq[i], 1e-12 * scale);
    }
  }
}

TEST(DerivativeSamples, RejectsBadOrderAndSmallGrid) {
  const auto g = build_interval_grid(1.0, 9);
  const std::vector<double> f(9, 0.0);
  EXPECT_THROW(derivative_samples(g, f, 0), InvalidArgument);
  EXPECT_THROW(derivative_samples(g, f, 4), InvalidArgument);
  const auto small = build_interval_grid(1.0, 6);
  EXPECT_THROW(derivative_samples(small, std::vector<double>(6, 0.0), 1), InvalidArgument);
}

}  // namespace
}  // namespace kdvbs
