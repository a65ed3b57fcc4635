#include "kdvbs/kernels.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "oracles/kernel_oracle.hpp"

namespace kdvbs {
namespace {

TriangleGrid unit_triangle(std::size_t n, double L = 1.0) { return TriangleGrid(build_interval_grid(L, n)); }

// Solves are the expensive part; share them across tests.
const GainKernel& gain_101() {
  static const GainKernel k = solve_gain_kernel(unit_triangle(101), 1.0);
  return k;
}

TEST(GainKernel, ZeroLambdaGivesZeroKernel) {
  const auto k = solve_gain_kernel(unit_triangle(41), 0.0);
  EXPECT_EQ(k.max_abs(), 0.0);
  EXPECT_LE(k.residual_report().pde_rms, 1e-10);
  EXPECT_LE(k.residual_report().slope_rms, 1e-10);
}

TEST(GainKernel, DirichletConditionsAreExact) {
  const auto& k = gain_101();
  const std::size_t n = k.tri().edge_size();
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(k.at(i, i), 0.0);
    EXPECT_EQ(k.at(i, n - 1), 0.0);
  }
}

TEST(GainKernel, OwnResidualsBelowTolerance) {
  const auto& rep = gain_101().residual_report();
  EXPECT_LE(rep.pde_rms, 1e-6 * std::max(1.0, rep.max_abs_value));
  EXPECT_LE(rep.slope_rms, 1e-6);
  EXPECT_GT(rep.degree, 0);
}

TEST(GainKernel, DiagonalSlopeFromNodalValues) {
  // 4-point one-sided difference in x along the diagonal.
  const auto rep = kernel_residual(gain_101());
  EXPECT_LE(rep.slope_rms, 1e-6);
}

TEST(GainKernel, IndependentCenteredResidualIsSmall) {
  const auto& k = gain_101();
  const auto orc = oracle::centered_residual(k);
  // Truncation of the centered stencils is O(h^2) times fifth derivatives of k.
  EXPECT_LE(orc.pde_rms, 1e-3 * std::max(1.0, k.max_abs()));
  EXPECT_LE(orc.slope_rms, 1e-4);
  const auto lib = kernel_residual(k);
  EXPECT_LE(lib.pde_rms, 1e-3 * std::max(1.0, k.max_abs()));
}

TEST(GainKernel, ResidualReportsAgreeWithinTenfold) {
  // The independent residual is dominated by stencil truncation, the solver's
  // own by round-off; both sit below the same tolerance band.
  const auto& k = gain_101();
  const double tol = 1e-6;
  const auto indep = kernel_residual(k);
  const double scale = std::max(1.0, k.max_abs());
  EXPECT_LE(indep.slope_rms, 10.0 * tol);
  EXPECT_LE(k.residual_report().slope_rms, 10.0 * tol);
  EXPECT_LE(indep.pde_rms / scale, 10.0 * tol * 100.0) << "pde " << indep.pde_rms;
}

TEST(GainKernel, RefinementReducesIndependentResidual) {
  const auto coarse = solve_gain_kernel(unit_triangle(51), 1.0);
  const auto fine = gain_101();
  const double rc = kernel_residual(coarse).pde_rms;
  const double rf = kernel_residual(fine).pde_rms;
  EXPECT_GE(rc / rf, 2.0) << "coarse " << rc << " fine " << rf;
  const double oc = oracle::centered_residual(coarse).pde_rms;
  const double of = oracle::centered_residual(fine).pde_rms;
  EXPECT_GE(oc / of, 2.0) << "coarse " << oc << " fine " << of;
}

TEST(GainKernel, PerturbationRaisesResidual) {
  const auto& k = gain_101();
  std::vector<double> v = k.values();
  v[k.tri().index(30, 60)] += 1.0;
  const GainKernel bumped(k.tri(), v, k.lambda());
  EXPECT_GT(kernel_residual(bumped).pde_rms, kernel_residual(k).pde_rms);
  EXPECT_GT(oracle::centered_residual(bumped).pde_rms, oracle::centered_residual(k).pde_rms);
}

TEST(GainKernel, RejectsBadArguments) {
  EXPECT_THROW(solve_gain_kernel(unit_triangle(21), -1.0), InvalidArgument);
  EXPECT_THROW(solve_gain_kernel(unit_triangle(21), 1.0, 0.0), InvalidArgument);
  EXPECT_THROW(solve_gain_kernel(unit_triangle(15), 1.0), InvalidArgument);
}

TEST(GainKernel, UnreachableToleranceReportsResiduals) {
  try {
    solve_gain_kernel(unit_triangle(21), 1.0, 1e-30);
    FAIL() << "expected KernelSolveFailure";
  } catch (const KernelSolveFailure& e) {
    EXPECT_GT(e.report().pde_rms + e.report().slope_rms, 0.0);
  }
}

TEST(GainKernel, ZeroKernelHasZeroResidual) {
  const auto tri = unit_triangle(21);
  const GainKernel zero(tri, std::vector<double>(tri.size(), 0.0), 0.0);
  const auto rep = kernel_residual(zero);
  EXPECT_EQ(rep.pde_rms, 0.0);
  EXPECT_EQ(rep.slope_rms, 0.0);
  EXPECT_EQ(rep.dirichlet_max, 0.0);
}

TEST(ObserverKernel, ReflectionConditions) {
  const auto p = observer_kernel_from_gain(gain_101());
  const std::size_t n = p.tri().edge_size();
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(p.at(i, i), 0.0);
    EXPECT_EQ(p.at(0, i), 0.0);
  }
  const auto rep = kernel_residual(p);
  EXPECT_LE(rep.slope_rms, 1e-6);
  EXPECT_LE(rep.pde_rms, 1e-3 * std::max(1.0, p.max_abs()));
}

TEST(ObserverKernel, ZeroLambda) {
  const auto p = observer_kernel_from_gain(solve_gain_kernel(unit_triangle(31), 0.0));
  EXPECT_EQ(p.max_abs(), 0.0);
  const auto g = injection_gain(p);
  for (double v : g.samples) EXPECT_EQ(v, 0.0);
}

TEST(ObserverKernel, ReflectionIsInvolution) {
  const auto& k = gain_101();
  const auto back = gain_kernel_from_observer(observer_kernel_from_gain(k));
  EXPECT_EQ(back.values(), k.values());
}

TEST(ObserverKernel, DirectSolveMatchesReflection) {
  const double tol = 1e-6;
  const auto p_direct = solve_observer_kernel(unit_triangle(101), 1.0, tol);
  const auto p_reflect = observer_kernel_from_gain(gain_101());
  double diff = 0.0;
  for (std::size_t q = 0; q < p_direct.values().size(); ++q) {
    diff = std::max(diff, std::abs(p_direct.values()[q] - p_reflect.values()[q]));
  }
  EXPECT_LE(diff, 10.0 * tol);
}

TEST(InjectionGain, MatchesFeedbackRowThroughReflection) {
  const auto& k = gain_101();
  const auto p1 = injection_gain(observer_kernel_from_gain(k));
  const auto row = feedback_gain_row(k);
  const std::size_t n = row.samples.size();
  EXPECT_EQ(p1.samples[0], 0.0);
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(p1.samples[i], row.samples[n - 1 - i]);
}

TEST(FeedbackGainRow, EndpointsVanish) {
  const auto row = feedback_gain_row(gain_101());
  EXPECT_EQ(row.samples.front(), 0.0);
  EXPECT_EQ(row.samples.back(), 0.0);
  double m = 0.0;
  for (double v : row.samples) m = std::max(m, std::abs(v));
  EXPECT_GT(m, 0.0);
}

TEST(FeedbackGainRow, ContinuousInLambda) {
  const auto r1 = feedback_gain_row(gain_101());
  const auto r2 = feedback_gain_row(solve_gain_kernel(unit_triangle(101), 1.01));
  double diff = 0.0, m = 0.0;
  for (std::size_t j = 0; j < r1.samples.size(); ++j) {
    diff = std::max(diff, std::abs(r1.samples[j] - r2.samples[j]));
    m = std::max(m, std::abs(r1.samples[j]));
  }
  // Observed ratio is about 0.01, linear in the lambda step.
  EXPECT_LE(diff, 0.1 * m);
  EXPECT_LE(diff, 0.02 * m);
}

TEST(GainKernel, LargerDomain) {
  const double L = 2.0 * std::acos(-1.0);
  const auto k = solve_gain_kernel(unit_triangle(101, L), 1.0);
  EXPECT_LE(k.residual_report().slope_rms, 1e-6 * L / 3.0);
}

TEST(KernelCsv, HeaderAndRows) {
  const auto k = solve_gain_kernel(unit_triangle(21), 0.5);
  std::ostringstream out;
  write_kernel_csv(out, k);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("# L=1 lambda=0.5 n=21 residual=", 0), 0u) << line;
  std::getline(in, line);
  EXPECT_EQ(line, "x,y,value");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, k.tri().size());
}

}  // namespace
}  // namespace kdvbs
