// Orchestration: kernel synthesis, closed-loop runs, lambda sweeps and
// spectra, each writing `<prefix>_<artifact>.<ext>` files.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdvbs/config.hpp"
#include "kdvbs/diagnostics.hpp"
#include "kdvbs/dynamics.hpp"
#include "kdvbs/io.hpp"
#include "kdvbs/kernels.hpp"
#include "kdvbs/transforms.hpp"

namespace kdvbs {

using json = nlohmann::ordered_json;

inline std::filesystem::path artifact_path(const SimConfig& c, const std::string& artifact, const std::string& ext) {
  return std::filesystem::path(c.output_prefix + "_" + artifact + "." + ext);
}

struct Synthesis {
  GainKernel k;
  ObserverKernel p;
  InjectionGain p1;
  FeedbackGainRow row;
  ResidualReport k_check;  // finite-difference re-evaluation
  ResidualReport p_check;
};

inline Synthesis synthesize(const SimConfig& c) {
  const TriangleGrid tri(build_interval_grid(c.L, c.n));
  KernelSolveOptions opts;
  opts.max_degree = c.kernel_max_degree;
  GainKernel k = solve_gain_kernel(tri, c.lambda, c.kernel_tol, opts);
  ObserverKernel p = observer_kernel_from_gain(k);
  InjectionGain p1 = injection_gain(p);
  FeedbackGainRow row = feedback_gain_row(k);
  const ResidualReport kc = kernel_residual(k);
  const ResidualReport pc = kernel_residual(p);
  return {std::move(k), std::move(p), std::move(p1), std::move(row), kc, pc};
}

namespace detail {

inline json residual_json(const ResidualReport& r) {
  return json{{"pde_rms", r.pde_rms},           {"pde_max", r.pde_max},
              {"slope_rms", r.slope_rms},       {"slope_max", r.slope_max},
              {"dirichlet_max", r.dirichlet_max}, {"diagonal_max", r.diagonal_max},
              {"max_abs_value", r.max_abs_value}, {"degree", r.degree}};
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

inline void write_profile(const std::filesystem::path& path, const char* column, const IntervalGrid& grid,
                          const std::vector<double>& v) {
  auto out = open_output(path);
  out << column << ",value\n";
  for (std::size_t i = 0; i < v.size(); ++i) out << format_number(grid.node(i)) << ',' << format_number(v[i]) << '\n';
}

}  // namespace detail

/// Writes k, p, k(0,.) and p1, plus a residual summary; returns the summary.
inline json run_synthesis(const SimConfig& c) {
  const Synthesis s = synthesize(c);
  {
    auto out = open_output(artifact_path(c, "kernel_k", "csv"));
    write_kernel_csv(out, s.k);
  }
  {
    auto out = open_output(artifact_path(c, "kernel_p", "csv"));
    write_kernel_csv(out, s.p);
  }
  detail::write_profile(artifact_path(c, "feedback_row", "csv"), "y", s.row.grid, s.row.samples);
  detail::write_profile(artifact_path(c, "injection_gain", "csv"), "x", s.p1.grid, s.p1.samples);
  json j{{"L", c.L},
         {"lambda", c.lambda},
         {"n", c.n},
         {"kernel_tol", c.kernel_tol},
         {"solver", detail::residual_json(s.k.residual_report())},
         {"check_k", detail::residual_json(s.k_check)},
         {"check_p", detail::residual_json(s.p_check)},
         {"D", gain_bound_D(s.p1, s.k)}};
  detail::write_json(artifact_path(c, "synthesis", "json"), j);
  return j;
}

struct ClosedLoopResult {
  Trajectory loop;     // (u, uhat); uhat = 0 in open loop
  Trajectory target;   // (what, wtil)
  LyapunovSeries lyapunov;
  TraceBoundReport trace;
  NormEquivalence equivalence;
  IssConstants iss;
  LyapunovWeights weights;
  double D = 0.0;
  double lambda_fit = 0.0;
  double lambda_fit_h3 = 0.0;
  double max_real_eig = 0.0;
  json summary;
};

inline DiscreteOperator loop_operator(const SimConfig& c, const Synthesis& s) {
  const IntervalGrid grid = build_interval_grid(c.L, c.n);
  if (c.open_loop) return build_operator(grid, SystemVariant::plant());
  return build_operator(grid, SystemVariant::closed_loop(s.p1, s.row));
}

namespace detail {

inline double safe_fit(const std::vector<double>& t, const std::vector<double>& v) {
  try {
    return fit_decay_rate(t, v);
  } catch (const InvalidArgument&) {
    return 0.0;  // zero run: no decay to measure
  }
}

}  // namespace detail

/// Runs the loop (or the plant alone with kappa = 0 when open_loop), maps it
/// to target coordinates, evaluates every diagnostic and writes
/// trajectory, diagnostics and summary files.
inline ClosedLoopResult run_closed_loop(const SimConfig& c) {
  const Synthesis s = synthesize(c);
  const IntervalGrid grid = s.p1.grid;
  const DiscreteOperator op = loop_operator(c, s);
  const Field u0 = initial_profile(c, grid);
  const TimeSettings ts{c.resolved_dt(), c.resolved_T()};

  ClosedLoopResult r;
  if (c.open_loop) {
    const Trajectory plant = simulate(op, {u0}, ts, [](double) { return 0.0; });
    r.loop = Trajectory{ts, VariantTag::closed_loop, {}};
    for (const auto& snap : plant.snapshots) {
      StateSnapshot both = snap;
      both.fields.push_back(Field::zeros(grid));
      both.traces.push_back(0.0);
      both.left_slopes.push_back(0.0);
      r.loop.snapshots.push_back(std::move(both));
    }
  } else {
    r.loop = simulate(op, {u0, Field::zeros(grid)}, ts);
  }
  r.target = to_target_coordinates(r.loop, s.k, s.p);

  r.D = gain_bound_D(s.p1, s.k);
  r.trace = trace_bound_check(r.target, c.lambda);
  bool have_weights = false;
  try {
    r.equivalence = norm_equivalence_report(r.target, c.lambda);
    r.iss = iss_constants(r.trace, r.equivalence, c.lambda, c.L);
    if (c.lambda > 0.0) {
      r.weights = choose_weights(r.D, r.iss.a, r.iss.b, c.lambda, c.resolved_epsilon());
      have_weights = true;
    }
  } catch (const UndefinedRatio&) {
    // zero error trajectory: the ratios do not exist, unit weights stand in
  }
  r.lyapunov = lyapunov_series(r.target, c.lambda, r.weights.A, r.weights.B);

  std::vector<double> times = r.loop.times(), norms, h3;
  for (const auto& snap : r.loop.snapshots) {
    norms.push_back(l2_norm(grid, snap.fields[0].samples) + l2_norm(grid, snap.fields[1].samples));
    h3.push_back(h3_norm(snap.fields[0]));
  }
  r.lambda_fit = detail::safe_fit(times, norms);
  r.lambda_fit_h3 = detail::safe_fit(times, h3);
  r.max_real_eig = spectrum(op).max_real;

  {
    auto out = open_output(artifact_path(c, "trajectory", "csv"));
    out << "t,x,u,uhat\n";
    for (std::size_t k = 0; k < r.loop.size(); k += c.output_stride) {
      const auto& snap = r.loop.snapshots[k];
      const std::string t = format_number(snap.t);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        out << t << ',' << format_number(grid.node(i)) << ',' << format_number(snap.fields[0].samples[i]) << ','
            << format_number(snap.fields[1].samples[i]) << '\n';
      }
    }
  }
  {
    auto out = open_output(artifact_path(c, "diagnostics", "csv"));
    out << "t,norm_u,norm_uhat,norm_err,H3_u,y,V1,V2,V3,V,trace_lhs,trace_rhs\n";
    for (std::size_t k = 0; k < r.loop.size(); ++k) {
      const auto& snap = r.loop.snapshots[k];
      std::vector<double> err(grid.size());
      for (std::size_t i = 0; i < err.size(); ++i) err[i] = snap.fields[0].samples[i] - snap.fields[1].samples[i];
      const double cols[] = {snap.t,
                             l2_norm(grid, snap.fields[0].samples),
                             l2_norm(grid, snap.fields[1].samples),
                             l2_norm(grid, err),
                             h3[k],
                             snap.traces[0],
                             r.lyapunov.V1[k],
                             r.lyapunov.V2[k],
                             r.lyapunov.V3[k],
                             r.lyapunov.V[k],
                             r.trace.lhs[k],
                             r.trace.rhs[k]};
      for (std::size_t q = 0; q < std::size(cols); ++q) out << (q ? "," : "") << format_number(cols[q]);
      out << '\n';
    }
  }

  r.summary = json{{"lambda", c.lambda},
                   {"lambda_fit", r.lambda_fit},
                   {"D", r.D},
                   {"A", r.weights.A},
                   {"B", r.weights.B},
                   {"max_real_eig", r.max_real_eig},
                   {"slack_min", r.trace.min_slack},
                   {"L", c.L},
                   {"n", c.n},
                   {"dt", ts.dt},
                   {"T", ts.horizon},
                   {"epsilon", c.resolved_epsilon()},
                   {"open_loop", c.open_loop},
                   {"initial_condition", to_string(c.initial_condition)},
                   {"lambda_fit_h3", r.lambda_fit_h3},
                   {"slack_min_relative", r.trace.min_relative_slack},
                   {"weights_from_formula", have_weights},
                   {"d1", r.equivalence.d1},
                   {"d2", r.equivalence.d2},
                   {"rho", r.iss.rho},
                   {"a", r.iss.a},
                   {"b", r.iss.b},
                   {"iss_slack_min", r.iss.min_slack},
                   {"kernel_residual", detail::residual_json(s.k.residual_report())},
                   {"kernel_check", detail::residual_json(s.k_check)}};
  detail::write_json(artifact_path(c, "summary", "json"), r.summary);
  return r;
}

struct SweepEntry {
  double lambda = 0.0;
  bool ok = false;
  std::string error;
  double lambda_fit = 0.0;
  double max_real_eig = 0.0;
};

/// One closed-loop run per lambda, concurrently; entry i writes under
/// `<prefix>_sweep<i>`. Failures are recorded and the sweep goes on.
inline std::vector<SweepEntry> run_sweep(const SimConfig& base, const std::vector<double>& lambdas) {
  std::vector<std::future<SweepEntry>> jobs;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    SimConfig c = base;
    c.lambda = lambdas[i];
    if (!base.epsilon) c.epsilon.reset();
    c.output_prefix = base.output_prefix + "_sweep" + std::to_string(i);
    jobs.push_back(std::async(std::launch::async, [c]() {
      SweepEntry e;
      e.lambda = c.lambda;
      try {
        validate(c);
        const auto r = run_closed_loop(c);
        e.ok = true;
        e.lambda_fit = r.lambda_fit;
        e.max_real_eig = r.max_real_eig;
      } catch (const std::exception& ex) {
        e.error = ex.what();
      }
      return e;
    }));
  }
  std::vector<SweepEntry> out;
  for (auto& j : jobs) out.push_back(j.get());

  auto csv = open_output(artifact_path(base, "sweep", "csv"));
  csv << "lambda,lambda_fit,max_real_eig,status\n";
  for (const auto& e : out) {
    csv << format_number(e.lambda) << ',' << (e.ok ? format_number(e.lambda_fit) : "") << ','
        << (e.ok ? format_number(e.max_real_eig) : "") << ',' << (e.ok ? "ok" : "failed") << '\n';
  }
  return out;
}

/// Eigenvalues of the loop operator (closed loop, or the plant with
/// kappa = 0 when open_loop).
inline SpectrumReport run_spectrum(const SimConfig& c) {
  const Synthesis s = synthesize(c);
  const DiscreteOperator op = loop_operator(c, s);
  SpectrumReport r = spectrum(op);
  std::vector<std::complex<double>> ev = r.eigenvalues;
  std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
    return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
  });
  {
    auto out = open_output(artifact_path(c, "spectrum", "csv"));
    out << "re,im\n";
    for (const auto& e : ev) out << format_number(e.real()) << ',' << format_number(e.imag()) << '\n';
  }
  detail::write_json(artifact_path(c, "spectrum", "json"),
                     json{{"lambda", c.lambda},
                          {"L", c.L},
                          {"n", c.n},
                          {"variant", to_string(op.variant.tag)},
                          {"count", ev.size()},
                          {"max_real_eig", r.max_real}});
  return r;
}

}  // namespace kdvbs
