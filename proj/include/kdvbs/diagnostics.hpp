// Lyapunov functionals, trace-inequality checks, weight selection, decay
// fits and spectra for the discrete closed loop.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "kdvbs/dynamics.hpp"
#include "kdvbs/errors.hpp"
#include "kdvbs/kernels.hpp"
#include "kdvbs/mesh.hpp"
#include "kdvbs/transforms.hpp"

namespace kdvbs {

// ||f|| + ||f_xxx||
inline double h3_norm(const Field& f) {
  return l2_norm(f.grid, f.samples) + l2_norm(f.grid, derivative_samples(f.grid, f.samples, 3));
}

/// Nodal w_t = (A - lambda) w of the homogeneous target system (zero at both ends).
inline std::vector<double> target_time_derivative(const DiscreteOperator& target, const Field& w) {
  const Eigen::VectorXd y = stack_interior(target, {w});
  const Eigen::VectorXd d = target.matrix * y;
  std::vector<double> out(w.size(), 0.0);
  for (Eigen::Index i = 0; i < d.size(); ++i) out[static_cast<std::size_t>(i) + 1] = d(i);
  return out;
}

/// Maps a closed-loop (u, uhat) trajectory to (what, wtil) = (Pi uhat, Pi_o^{-1}(u - uhat)).
inline Trajectory to_target_coordinates(const Trajectory& loop, const GainKernel& k, const ObserverKernel& p) {
  if (loop.tag != VariantTag::closed_loop) throw InvalidArgument("to_target_coordinates: need a closed-loop trajectory");
  Trajectory out{loop.settings, VariantTag::coupled_target, {}};
  out.snapshots.reserve(loop.size());
  for (const auto& s : loop.snapshots) {
    const Field& u = s.fields[0];
    const Field& uhat = s.fields[1];
    Field err = u;
    for (std::size_t i = 0; i < err.size(); ++i) err.samples[i] -= uhat.samples[i];
    StateSnapshot t;
    t.t = s.t;
    t.fields.push_back(apply_volterra(k, uhat));
    t.fields.push_back(invert_volterra(p, err));
    for (const auto& f : t.fields) {
      t.traces.push_back(trace_second_derivative(f));
      t.left_slopes.push_back(left_slope(f));
    }
    out.snapshots.push_back(std::move(t));
  }
  return out;
}

struct LyapunovSeries {
  double A = 0.0, B = 0.0;
  std::vector<double> times, V1, V2, V3, V3_tilde, V;
};

namespace detail {

inline void require_pair(const Trajectory& traj, const char* who) {
  if (traj.snapshots.empty()) throw InvalidArgument(std::string(who) + ": empty trajectory");
  for (const auto& s : traj.snapshots) {
    if (s.fields.size() != 2) throw InvalidArgument(std::string(who) + ": trajectory must carry (what, wtil)");
  }
}

}  // namespace detail

/// V1 = A/2 |what|^2, V2 = B/2 |wtil|^2, V3 = B/2 |wtil_t|^2, V3~ = B/2 |wtil_xxx|^2,
/// with wtil_t taken from the target operator, not from time differences.
inline LyapunovSeries lyapunov_series(const Trajectory& traj, double lambda, double A, double B) {
  if (!(A > 0.0) || !(B > 0.0)) throw InvalidArgument("lyapunov_series: weights must be positive");
  detail::require_pair(traj, "lyapunov_series");
  const IntervalGrid& grid = traj.snapshots.front().fields[0].grid;
  const DiscreteOperator target = build_operator(grid, SystemVariant::target(lambda));
  LyapunovSeries out;
  out.A = A;
  out.B = B;
  for (const auto& s : traj.snapshots) {
    const Field& what = s.fields[0];
    const Field& wtil = s.fields[1];
    out.times.push_back(s.t);
    out.V1.push_back(0.5 * A * squared_l2(grid, what.samples));
    out.V2.push_back(0.5 * B * squared_l2(grid, wtil.samples));
    out.V3.push_back(0.5 * B * squared_l2(grid, target_time_derivative(target, wtil)));
    out.V3_tilde.push_back(0.5 * B * squared_l2(grid, derivative_samples(grid, wtil.samples, 3)));
    out.V.push_back(out.V1.back() + out.V2.back() + out.V3.back());
  }
  return out;
}

struct NormEquivalence {
  double d1 = 0.0;  // min of (V2 + V3) / (V2 + V3~)
  double d2 = 0.0;  // max
  std::size_t samples = 0;
};

/// Ratios over snapshots whose denominator is above a 1e-24 relative floor
/// (the squares of a 1e-12 norm floor).
inline NormEquivalence norm_equivalence_report(const Trajectory& traj, double lambda) {
  const LyapunovSeries s = lyapunov_series(traj, lambda, 1.0, 1.0);
  double top = 0.0;
  for (std::size_t k = 0; k < s.V.size(); ++k) top = std::max(top, s.V2[k] + s.V3_tilde[k]);
  if (top == 0.0) throw UndefinedRatio("norm_equivalence_report: error-target trajectory is identically zero");
  NormEquivalence r{std::numeric_limits<double>::infinity(), 0.0, 0};
  for (std::size_t k = 0; k < s.V.size(); ++k) {
    const double den = s.V2[k] + s.V3_tilde[k];
    if (den <= 1e-24 * top) continue;
    const double ratio = (s.V2[k] + s.V3[k]) / den;
    r.d1 = std::min(r.d1, ratio);
    r.d2 = std::max(r.d2, ratio);
    ++r.samples;
  }
  return r;
}

/// D = max_x |p1(x) - \int_x^L k(x,y) p1(y) dy|.
inline double gain_bound_D(const InjectionGain& p1, const GainKernel& k) {
  double d = 0.0;
  for (double v : coupling_gain(k, p1)) d = std::max(d, std::abs(v));
  return d;
}

struct TraceBoundReport {
  std::vector<double> lhs, rhs, slack;
  std::vector<double> relative_slack;  // slack / rhs, from the max-normalized field
  // pieces of rhs, kept for the coarser a|w|^2 + b|w_t|^2 bound
  std::vector<double> norm_w, norm_wx, norm_wxx, norm_wxxx, norm_wt;
  double min_slack = 0.0;
  double min_relative_slack = 0.0;
};

/// |w_xx(L)|^2 <= (1/L + L)|w_xx|^2 + (2 lambda + 1/L)|w_x|^2 + (1/L)|w_t|^2 per
/// snapshot, for the error-target field (index `field`). Every term is
/// quadratic in w, so each snapshot is evaluated on w / max|w| and scaled
/// back; squares of a decayed state would otherwise underflow.
inline TraceBoundReport trace_bound_check(const Trajectory& traj, double lambda, std::size_t field = 1) {
  if (traj.snapshots.empty()) throw InvalidArgument("trace_bound_check: empty trajectory");
  const IntervalGrid& grid = traj.snapshots.front().fields.at(field).grid;
  const double L = grid.length();
  const DiscreteOperator target = build_operator(grid, SystemVariant::target(lambda));
  TraceBoundReport r;
  r.min_slack = std::numeric_limits<double>::infinity();
  r.min_relative_slack = std::numeric_limits<double>::infinity();
  for (const auto& s : traj.snapshots) {
    Field w = s.fields.at(field);
    double scale = 0.0;
    for (double v : w.samples) scale = std::max(scale, std::abs(v));
    if (scale > 0.0) {
      for (double& v : w.samples) v /= scale;
    }
    const double sq = scale * scale;
    const double wxx_L = trace_second_derivative(w);
    const double n0 = squared_l2(grid, w.samples);
    const double n1 = squared_l2(grid, derivative_samples(grid, w.samples, 1));
    const double n2 = squared_l2(grid, derivative_samples(grid, w.samples, 2));
    const double n3 = squared_l2(grid, derivative_samples(grid, w.samples, 3));
    const double nt = squared_l2(grid, target_time_derivative(target, w));
    const double lhs = wxx_L * wxx_L;
    const double rhs = (1.0 / L + L) * n2 + (2.0 * lambda + 1.0 / L) * n1 + nt / L;
    const double rel = rhs > 0.0 ? (rhs - lhs) / rhs : (lhs > 0.0 ? -std::numeric_limits<double>::infinity() : 0.0);
    r.lhs.push_back(sq * lhs);
    r.rhs.push_back(sq * rhs);
    r.slack.push_back(sq * (rhs - lhs));
    r.relative_slack.push_back(rel);
    r.norm_w.push_back(sq * n0);
    r.norm_wx.push_back(sq * n1);
    r.norm_wxx.push_back(sq * n2);
    r.norm_wxxx.push_back(sq * n3);
    r.norm_wt.push_back(sq * nt);
    r.min_slack = std::min(r.min_slack, r.slack.back());
    if (scale > 0.0) r.min_relative_slack = std::min(r.min_relative_slack, rel);
  }
  if (!std::isfinite(r.min_relative_slack)) r.min_relative_slack = 0.0;
  return r;
}

struct IssConstants {
  double rho = 0.0;  // max (c1|w_xx|^2 + c2|w_x|^2) / (|w|^2 + |w_xxx|^2)
  double d1 = 0.0;
  double a = 0.0;
  double b = 0.0;
  double min_slack = 0.0;  // of a|w|^2 + b|w_t|^2 - |w_xx(L)|^2
};

/// Constants of |w_xx(L)|^2 <= a|w|^2 + b|w_t|^2. With c1 = 1/L + L,
/// c2 = 2 lambda + 1/L and the norm-equivalence constant d1,
///   c1|w_xx|^2 + c2|w_x|^2 <= rho (|w|^2 + |w_xxx|^2) <= (rho/d1)(|w|^2 + |w_t|^2),
/// so a = rho/d1 and b = rho/d1 + 1/L.
inline IssConstants iss_constants(const TraceBoundReport& tr, const NormEquivalence& ne, double lambda, double L) {
  if (!(ne.d1 > 0.0)) throw UndefinedRatio("iss_constants: norm-equivalence constant must be positive");
  const double c1 = 1.0 / L + L, c2 = 2.0 * lambda + 1.0 / L;
  IssConstants c;
  double top = 0.0;
  for (std::size_t k = 0; k < tr.lhs.size(); ++k) top = std::max(top, tr.norm_w[k] + tr.norm_wxxx[k]);
  for (std::size_t k = 0; k < tr.lhs.size(); ++k) {
    const double den = tr.norm_w[k] + tr.norm_wxxx[k];
    if (den <= 1e-24 * top) continue;
    c.rho = std::max(c.rho, (c1 * tr.norm_wxx[k] + c2 * tr.norm_wx[k]) / den);
  }
  c.d1 = ne.d1;
  c.a = c.rho / ne.d1;
  c.b = c.rho / ne.d1 + 1.0 / L;
  c.min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < tr.lhs.size(); ++k) {
    c.min_slack = std::min(c.min_slack, c.a * tr.norm_w[k] + c.b * tr.norm_wt[k] - tr.lhs[k]);
  }
  if (tr.lhs.empty()) c.min_slack = 0.0;
  return c;
}

struct LyapunovWeights {
  double A = 1.0;
  double B = 1.0;
};

/// A = max(1, D^2/eps), B = max(1, max(a,b) A^2 / eps).
inline LyapunovWeights choose_weights(double D, double a, double b, double lambda, double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon < lambda)) throw InvalidArgument("choose_weights: need 0 < epsilon < lambda");
  if (D < 0.0 || a < 0.0 || b < 0.0) throw InvalidArgument("choose_weights: D, a, b must be >= 0");
  LyapunovWeights w;
  w.A = std::max(1.0, D * D / epsilon);
  w.B = std::max(1.0, std::max(a, b) * w.A * w.A / epsilon);
  return w;
}

struct FitOptions {
  double drop_fraction = 0.1;  // leading share of the window skipped as transient
  double floor = 1e-12;        // samples below floor * max are round-off, not signal
};

namespace detail {

// [begin, end) of the samples used for fits: the prefix above the floor,
// minus its leading drop_fraction.
inline std::pair<std::size_t, std::size_t> fit_window(std::span<const double> v, const FitOptions& opt) {
  double top = 0.0;
  for (double x : v) top = std::max(top, std::abs(x));
  std::size_t end = 0;
  while (end < v.size() && std::abs(v[end]) > opt.floor * top) ++end;
  const auto begin = static_cast<std::size_t>(std::floor(opt.drop_fraction * static_cast<double>(end)));
  return {begin, end};
}

}  // namespace detail

/// Least-squares slope of -log(norm) against t over the fit window.
inline double fit_decay_rate(std::span<const double> times, std::span<const double> norms, const FitOptions& opt = {}) {
  if (times.size() != norms.size()) throw InvalidArgument("fit_decay_rate: size mismatch");
  for (double v : norms) {
    if (!(v >= 0.0)) throw InvalidArgument("fit_decay_rate: norms must be non-negative");
  }
  const auto [begin, end] = detail::fit_window(norms, opt);
  if (end < begin + 2) throw InvalidArgument("fit_decay_rate: fewer than two positive samples in the fit window");
  double st = 0.0, sy = 0.0;
  const double count = static_cast<double>(end - begin);
  for (std::size_t k = begin; k < end; ++k) {
    st += times[k];
    sy += std::log(norms[k]);
  }
  const double tm = st / count, ym = sy / count;
  double num = 0.0, den = 0.0;
  for (std::size_t k = begin; k < end; ++k) {
    num += (times[k] - tm) * (std::log(norms[k]) - ym);
    den += (times[k] - tm) * (times[k] - tm);
  }
  if (den == 0.0) throw InvalidArgument("fit_decay_rate: times must not all coincide");
  return -num / den;
}

/// Largest relative increase per unit time of s(t) e^{rate t} between
/// consecutive samples, over the samples above the noise floor. A value
/// <= tol means the weighted series is non-increasing within tol.
inline double weighted_growth(std::span<const double> times, std::span<const double> s, double rate,
                              double floor = 1e-12) {
  FitOptions opt;
  opt.drop_fraction = 0.0;
  opt.floor = floor;
  const auto [begin, end] = detail::fit_window(s, opt);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = begin + 1; k < end; ++k) {
    const double dt = times[k] - times[k - 1];
    const double ratio = (s[k] / s[k - 1]) * std::exp(rate * dt);
    worst = std::max(worst, (ratio - 1.0) / dt);
  }
  return end > begin + 1 ? worst : 0.0;
}

struct SpectrumReport {
  std::vector<std::complex<double>> eigenvalues;
  double max_real = 0.0;
};

inline SpectrumReport spectrum(const DiscreteOperator& op) {
  const Eigen::MatrixXd dense(op.matrix);
  Eigen::EigenSolver<Eigen::MatrixXd> es(dense, false);
  if (es.info() != Eigen::Success) throw NumericFailure("spectrum: eigensolver did not converge");
  SpectrumReport r;
  r.max_real = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    r.eigenvalues.push_back(es.eigenvalues()(i));
    r.max_real = std::max(r.max_real, es.eigenvalues()(i).real());
  }
  return r;
}

}  // namespace kdvbs
