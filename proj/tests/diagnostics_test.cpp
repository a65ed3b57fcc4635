#include "kdvbs/diagnostics.hpp"

#include <cmath>

#include <gtest/gtest.h>

namespace kdvbs {
namespace {

Field bump(const IntervalGrid& g) {
  const double c = 0.5 * g.length(), w = g.length() / 16.0;
  return Field::sample(g, [&](double x) { return std::exp(-(x - c) * (x - c) / (2 * w * w)); });
}

struct Setup {
  GainKernel k;
  ObserverKernel p;
  InjectionGain p1;
  FeedbackGainRow row;
};

const Setup& setup_101() {
  static const Setup s = [] {
    auto k = solve_gain_kernel(TriangleGrid(build_interval_grid(1.0, 101)), 1.0);
    auto p = observer_kernel_from_gain(k);
    auto p1 = injection_gain(p);
    auto row = feedback_gain_row(k);
    return Setup{std::move(k), std::move(p), std::move(p1), std::move(row)};
  }();
  return s;
}

Trajectory coupled_run(const Setup& s, double T, double scale = 1.0) {
  const auto& g = s.p1.grid;
  const auto op = build_operator(g, SystemVariant::coupled_target(1.0, coupling_gain(s.k, s.p1)));
  Field w0 = invert_volterra(s.p, bump(g));
  for (double& v : w0.samples) v *= scale;
  return simulate(op, {Field::zeros(g), w0}, {g.spacing(), T});
}

TEST(Lyapunov, ZeroTrajectory) {
  const auto g = build_interval_grid(1.0, 31);
  const auto op = build_operator(g, SystemVariant::coupled_target(1.0, std::vector<double>(31, 0.0)));
  const auto traj = simulate(op, {Field::zeros(g), Field::zeros(g)}, {0.01, 0.1});
  const auto s = lyapunov_series(traj, 1.0, 1.0, 1.0);
  for (std::size_t k = 0; k < s.V.size(); ++k) EXPECT_EQ(s.V[k], 0.0);
  EXPECT_THROW(norm_equivalence_report(traj, 1.0), UndefinedRatio);
}

TEST(Lyapunov, HandIntegralOfConstant) {
  const auto g = build_interval_grid(1.0, 21);
  Trajectory traj;
  StateSnapshot s;
  s.fields = {Field::sample(g, [](double) { return 1.0; }), Field::zeros(g)};
  traj.snapshots.push_back(s);
  const auto ls = lyapunov_series(traj, 1.0, 2.0, 1.0);
  EXPECT_DOUBLE_EQ(ls.V1[0], 1.0);
  EXPECT_THROW(lyapunov_series(traj, 1.0, 0.0, 1.0), InvalidArgument);
}

TEST(Lyapunov, QuadraticScalingAndSum) {
  const auto& s = setup_101();
  const auto a = lyapunov_series(coupled_run(s, 0.2), 1.0, 3.0, 5.0);
  const auto b = lyapunov_series(coupled_run(s, 0.2, 10.0), 1.0, 3.0, 5.0);
  for (std::size_t k = 0; k < a.V.size(); ++k) {
    EXPECT_NEAR(b.V[k], 100.0 * a.V[k], 1e-9 * b.V[k] + 1e-300);
    EXPECT_NEAR(b.V3_tilde[k], 100.0 * a.V3_tilde[k], 1e-9 * b.V3_tilde[k] + 1e-300);
    EXPECT_DOUBLE_EQ(a.V[k], a.V1[k] + a.V2[k] + a.V3[k]);
    EXPECT_GE(a.V1[k], 0.0);
  }
}

TEST(Lyapunov, ErrorEnergyDecaysAtLambda) {
  const auto& s = setup_101();
  const auto ls = lyapunov_series(coupled_run(s, 2.0), 1.0, 1.0, 1.0);
  EXPECT_LE(weighted_growth(ls.times, ls.V2, 2.0), 1e-3);
  EXPECT_LE(weighted_growth(ls.times, ls.V3, 2.0), 1e-3);
}

TEST(NormEquivalence, BoundsAndHomogeneity) {
  const auto& s = setup_101();
  const auto r1 = norm_equivalence_report(coupled_run(s, 0.5), 1.0);
  const auto r10 = norm_equivalence_report(coupled_run(s, 0.5, 10.0), 1.0);
  EXPECT_GT(r1.d1, 0.0);
  EXPECT_LE(r1.d1, r1.d2);
  EXPECT_GE(r1.d1, 1e-3);
  EXPECT_LE(r1.d2, 1e3);
  EXPECT_NEAR(r10.d1, r1.d1, 1e-10 * r1.d1);
  EXPECT_NEAR(r10.d2, r1.d2, 1e-10 * r1.d2);
}

TEST(GainBound, ZeroAndPositive) {
  const auto tri = TriangleGrid(build_interval_grid(1.0, 41));
  const auto k0 = solve_gain_kernel(tri, 0.0);
  EXPECT_EQ(gain_bound_D(injection_gain(observer_kernel_from_gain(k0)), k0), 0.0);
  const auto& s = setup_101();
  EXPECT_GT(gain_bound_D(s.p1, s.k), 0.0);
}

TEST(TraceBound, ZeroField) {
  const auto g = build_interval_grid(1.0, 31);
  Trajectory traj;
  StateSnapshot s;
  s.fields = {Field::zeros(g), Field::zeros(g)};
  traj.snapshots.push_back(s);
  const auto r = trace_bound_check(traj, 1.0);
  EXPECT_EQ(r.lhs[0], 0.0);
  EXPECT_EQ(r.rhs[0], 0.0);
  EXPECT_EQ(r.min_slack, 0.0);
}

TEST(TraceBound, HoldsAlongErrorTargetRun) {
  const auto& s = setup_101();
  const auto traj = coupled_run(s, 1.0);
  const auto r = trace_bound_check(traj, 1.0);
  for (std::size_t k = 0; k < r.lhs.size(); ++k) EXPECT_GE(r.slack[k], -1e-2 * r.rhs[k]);
  const auto ne = norm_equivalence_report(traj, 1.0);
  const auto c = iss_constants(r, ne, 1.0, 1.0);
  EXPECT_GT(c.a, 0.0);
  EXPECT_GT(c.b, c.a);
  EXPECT_GE(c.min_slack, -1e-2 * r.rhs[0]);
}

TEST(TraceBound, ScaleInvariantPastUnderflow) {
  // at 1e-170 every square underflows; the relative slack must not notice
  const auto g = build_interval_grid(1.0, 61);
  const Field w = Field::sample(g, [](double x) { return std::pow(1.0 - x, 2) * std::sin(3.0 * x + 0.4); });
  Field tiny = w;
  for (double& v : tiny.samples) v *= 1e-170;
  Trajectory traj;
  StateSnapshot a, b;
  a.fields = {Field::zeros(g), w};
  b.fields = {Field::zeros(g), tiny};
  traj.snapshots = {a, b};
  const auto r = trace_bound_check(traj, 1.0);
  EXPECT_GT(r.relative_slack[0], 0.0);
  EXPECT_NEAR(r.relative_slack[1], r.relative_slack[0], 1e-12);
  EXPECT_EQ(r.rhs[1], 0.0);
  EXPECT_EQ(r.min_relative_slack, r.relative_slack[0]);
}

TEST(ChooseWeights, Formulas) {
  const auto w = choose_weights(1.0, 1.0, 1.0, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(w.A, 2.0);
  EXPECT_DOUBLE_EQ(w.B, 8.0);
  const auto z = choose_weights(0.0, 0.3, 2.0, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(z.A, 1.0);
  EXPECT_DOUBLE_EQ(z.B, 4.0);
  EXPECT_THROW(choose_weights(1.0, 1.0, 1.0, 1.0, 1.0), InvalidArgument);
  EXPECT_THROW(choose_weights(1.0, 1.0, 1.0, 1.0, 0.0), InvalidArgument);
}

TEST(FitDecayRate, ExactExponentialsAndConstants) {
  std::vector<double> t, e, c, shifted;
  for (int k = 0; k <= 100; ++k) {
    t.push_back(0.01 * k);
    e.push_back(std::exp(-2.0 * t.back()));
    c.push_back(3.0);
    shifted.push_back(7.5 * e.back());
  }
  EXPECT_NEAR(fit_decay_rate(t, e), 2.0, 1e-10);
  EXPECT_NEAR(fit_decay_rate(t, c), 0.0, 1e-12);
  EXPECT_NEAR(fit_decay_rate(t, shifted), fit_decay_rate(t, e), 1e-12);
}

TEST(FitDecayRate, IgnoresRoundoffTail) {
  std::vector<double> t, v;
  for (int k = 0; k <= 100; ++k) {
    t.push_back(0.1 * k);
    v.push_back(k < 60 ? std::exp(-5.0 * t.back()) : 1e-300);
  }
  EXPECT_NEAR(fit_decay_rate(t, v), 5.0, 1e-10);
}

TEST(FitDecayRate, RejectsBadInput) {
  const std::vector<double> t{0.0, 1.0, 2.0}, neg{1.0, -1.0, 0.5}, zero{0.0, 0.0, 0.0};
  EXPECT_THROW(fit_decay_rate(t, neg), InvalidArgument);
  EXPECT_THROW(fit_decay_rate(t, zero), InvalidArgument);
}

TEST(Spectrum, ShiftIdentity) {
  const auto g = build_interval_grid(1.0, 41);
  const auto s0 = spectrum(build_operator(g, SystemVariant::target(0.0)));
  const auto s1 = spectrum(build_operator(g, SystemVariant::target(1.5)));
  EXPECT_EQ(s0.eigenvalues.size(), 39u);
  EXPECT_NEAR(s1.max_real, s0.max_real - 1.5, 1e-10 * std::max(1.0, std::abs(s0.max_real)));
}

TEST(Spectrum, OpenLoopDissipative) {
  for (double L : {1.0, 2.0 * M_PI}) {
    const auto s = spectrum(build_operator(build_interval_grid(L, 101), SystemVariant::plant()));
    EXPECT_LE(s.max_real, 1e-6);
  }
}

TEST(Spectrum, ClosedLoopBlockBelowMinusLambda) {
  const auto& s = setup_101();
  const auto r = spectrum(build_operator(s.p1.grid, SystemVariant::closed_loop(s.p1, s.row)));
  EXPECT_LE(r.max_real, -1.0 + 0.1);
  EXPECT_EQ(r.eigenvalues.size(), 2u * 99u);
}

TEST(H3Norm, SineOnPeriod) {
  // |sin| = |cos| = sqrt(pi) on [0, 2pi]
  const auto g = build_interval_grid(2 * M_PI, 401);
  const double v = h3_norm(Field::sample(g, [](double x) { return std::sin(x); }));
  EXPECT_NEAR(v, 2.0 * std::sqrt(M_PI), 1e-3);
}

}  // namespace
}  // namespace kdvbs
