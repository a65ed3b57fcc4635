// Semi-discrete linear KdV operators u_t = -u_x - u_xxx (+ variant terms) on
// the interior nodes 1..n-2, and an L-stable SDIRK2 integrator.
//
// Spatial closure: centered D1; centered 5-point D3 whose ghost value u_n
// comes from a 4th-order one-sided u_x(L) = 0; at node 1 a 5-point one-sided
// D3 on nodes 0..4. u(L) = 0 removes node n-1, and the left Dirichlet value
// enters through the input column. Every row is second-order consistent.
#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kdvbs/errors.hpp"
#include "kdvbs/kernels.hpp"
#include "kdvbs/mesh.hpp"
#include "kdvbs/transforms.hpp"

namespace kdvbs {

enum class VariantTag { plant, observer, error, target, coupled_target, time_derivative, closed_loop };

inline const char* to_string(VariantTag tag) {
  switch (tag) {
    case VariantTag::plant: return "plant";
    case VariantTag::observer: return "observer";
    case VariantTag::error: return "error";
    case VariantTag::target: return "target";
    case VariantTag::coupled_target: return "coupled_target";
    case VariantTag::time_derivative: return "time_derivative";
    case VariantTag::closed_loop: return "closed_loop";
  }
  return "?";
}

// Which terms a system carries. Fields unused by a tag are ignored.
//   plant           u' = Au + b kappa, kappa from `feedback` (state feedback) or external
//   observer        uhat' = A uhat + b kappa - p1 (y - r.uhat), y external, kappa = c.uhat
//   error           e' = A e + p1 r.e
//   target          w' = (A - lambda) w
//   coupled_target  (what, wtil): what' = (A - lambda) what - g r.wtil, wtil' = (A - lambda) wtil
//   time_derivative v' = Av + b kappa_dot, kappa_dot external
//   closed_loop     (u, uhat) with kappa = c.uhat and the observer driven by y = r.u
struct SystemVariant {
  VariantTag tag = VariantTag::plant;
  double lambda = 0.0;
  std::optional<InjectionGain> injection;
  std::optional<FeedbackGainRow> feedback;
  std::optional<std::vector<double>> coupling;  // nodal g = p1 - \int_x^L k(x,y) p1(y) dy

  static SystemVariant plant(std::optional<FeedbackGainRow> fb = std::nullopt) {
    return {VariantTag::plant, 0.0, std::nullopt, std::move(fb), std::nullopt};
  }
  static SystemVariant observer(InjectionGain p1, FeedbackGainRow fb) {
    return {VariantTag::observer, 0.0, std::move(p1), std::move(fb), std::nullopt};
  }
  static SystemVariant error(InjectionGain p1) {
    return {VariantTag::error, 0.0, std::move(p1), std::nullopt, std::nullopt};
  }
  static SystemVariant target(double lambda) {
    return {VariantTag::target, lambda, std::nullopt, std::nullopt, std::nullopt};
  }
  static SystemVariant coupled_target(double lambda, std::vector<double> g) {
    return {VariantTag::coupled_target, lambda, std::nullopt, std::nullopt, std::move(g)};
  }
  static SystemVariant time_derivative() {
    return {VariantTag::time_derivative, 0.0, std::nullopt, std::nullopt, std::nullopt};
  }
  static SystemVariant closed_loop(InjectionGain p1, FeedbackGainRow fb) {
    return {VariantTag::closed_loop, 0.0, std::move(p1), std::move(fb), std::nullopt};
  }
};

// One block per field; the state vector stacks the interior unknowns of each.
struct DiscreteOperator {
  IntervalGrid grid;
  SystemVariant variant;
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd input;  // column multiplying the external scalar input, zero if none
  std::size_t blocks = 1;

  std::size_t interior() const noexcept { return grid.size() - 2; }
  bool has_external_input() const noexcept { return input.size() > 0 && input.cwiseAbs().maxCoeff() > 0.0; }
};

namespace detail {

using Triplets = std::vector<Eigen::Triplet<double>>;

// -(D1 + D3) on interior nodes (row/col offset `off`), and the left-boundary column.
inline void add_kdv_block(const IntervalGrid& grid, Eigen::Index off, double shift, Triplets& t,
                          Eigen::VectorXd* b0) {
  const std::size_t n = grid.size();
  const double h = grid.spacing();
  const double h3 = h * h * h;
  // node 1: 5-point D3 on nodes 0..4
  const std::array<double, 5> left_offsets{-1.0, 0.0, 1.0, 2.0, 3.0};
  const auto left = fd_weights(0.0, left_offsets, 3);
  // ghost u_n from a 4th-order u_x(L) = 0 on nodes n-4..n
  const std::array<double, 5> right_offsets{-3.0, -2.0, -1.0, 0.0, 1.0};
  const auto gw = fd_weights(0.0, right_offsets, 1);
  std::vector<double> row(n + 1);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    row[i + 1] += 1.0 / (2.0 * h);
    row[i - 1] -= 1.0 / (2.0 * h);
    if (i == 1) {
      for (std::size_t q = 0; q < 5; ++q) row[q] += left[q] / h3;
    } else {
      row[i - 2] -= 1.0 / (2.0 * h3);
      row[i - 1] += 1.0 / h3;
      row[i + 1] -= 1.0 / h3;
      row[i + 2] += 1.0 / (2.0 * h3);
    }
    if (row[n] != 0.0) {
      for (std::size_t q = 0; q < 4; ++q) row[n - 4 + q] -= row[n] * gw[q] / gw[4];
      row[n] = 0.0;
    }
    const auto r = off + static_cast<Eigen::Index>(i - 1);
    for (std::size_t q = 1; q + 1 < n; ++q) {
      double v = -row[q];
      if (q == i) v -= shift;
      if (v != 0.0) t.emplace_back(r, off + static_cast<Eigen::Index>(q - 1), v);
    }
    if (b0) (*b0)(r) = -row[0];
  }
}

// Weights of the one-sided u_xx(L) stencil on the interior unknowns (u_{n-1} = 0).
inline std::array<std::pair<std::size_t, double>, 3> trace_weights(const IntervalGrid& grid) {
  const std::size_t m = grid.size() - 2;
  const double h2 = grid.spacing() * grid.spacing();
  return {{{m - 1, -5.0 / h2}, {m - 2, 4.0 / h2}, {m - 3, -1.0 / h2}}};
}

// Adds coef * (col_vec_i) * (r . x_block) for every interior i.
inline void add_trace_outer(const IntervalGrid& grid, std::span<const double> nodal, double coef,
                            Eigen::Index row_off, Eigen::Index col_off, Triplets& t) {
  const auto w = trace_weights(grid);
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const double g = coef * nodal[i];
    if (g == 0.0) continue;
    for (const auto& [q, wq] : w) {
      t.emplace_back(row_off + static_cast<Eigen::Index>(i - 1), col_off + static_cast<Eigen::Index>(q), g * wq);
    }
  }
}

// Interior trapezoid weights times k(0, y).
inline Eigen::VectorXd feedback_weights(const FeedbackGainRow& row) {
  const auto w = trapezoid_rule(row.grid).weights;
  const std::size_t m = row.grid.size() - 2;
  Eigen::VectorXd c(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) c(static_cast<Eigen::Index>(i)) = w[i + 1] * row.samples[i + 1];
  return c;
}

inline void add_boundary_feedback(const Eigen::VectorXd& b0, const Eigen::VectorXd& c, Eigen::Index row_off,
                                  Eigen::Index col_off, Triplets& t) {
  for (Eigen::Index r = 0; r < b0.size(); ++r) {
    if (b0(r) == 0.0) continue;
    for (Eigen::Index q = 0; q < c.size(); ++q) {
      if (c(q) != 0.0) t.emplace_back(row_off + r, col_off + q, b0(r) * c(q));
    }
  }
}

template <class T>
const T& require(const std::optional<T>& v, const char* what) {
  if (!v) throw InvalidArgument(std::string("build_operator: ") + what);
  return *v;
}

}  // namespace detail

inline DiscreteOperator build_operator(const IntervalGrid& grid, const SystemVariant& variant) {
  const std::size_t n = grid.size();
  if (n < 21) throw InvalidArgument("build_operator: need at least 21 nodes");
  if (!(variant.lambda >= 0.0)) throw InvalidArgument("build_operator: lambda must be >= 0");
  const auto m = static_cast<Eigen::Index>(n - 2);
  auto check_grid = [&](const IntervalGrid& g) {
    if (!(g == grid)) throw InvalidArgument("build_operator: gain grid does not match");
  };

  DiscreteOperator op{grid, variant, {}, {}, 1};
  detail::Triplets t;
  Eigen::VectorXd b0 = Eigen::VectorXd::Zero(m);

  switch (variant.tag) {
    case VariantTag::plant:
    case VariantTag::time_derivative: {
      detail::add_kdv_block(grid, 0, 0.0, t, &b0);
      if (variant.tag == VariantTag::plant && variant.feedback) {
        check_grid(variant.feedback->grid);
        detail::add_boundary_feedback(b0, detail::feedback_weights(*variant.feedback), 0, 0, t);
        op.input = Eigen::VectorXd::Zero(m);
      } else {
        op.input = b0;
      }
      break;
    }
    case VariantTag::observer: {
      const auto& p1 = detail::require(variant.injection, "observer needs an injection gain");
      const auto& fb = detail::require(variant.feedback, "observer needs a feedback row");
      check_grid(p1.grid);
      check_grid(fb.grid);
      detail::add_kdv_block(grid, 0, 0.0, t, &b0);
      detail::add_boundary_feedback(b0, detail::feedback_weights(fb), 0, 0, t);
      detail::add_trace_outer(grid, p1.samples, 1.0, 0, 0, t);
      op.input.resize(m);
      for (Eigen::Index i = 0; i < m; ++i) op.input(i) = -p1.samples[static_cast<std::size_t>(i) + 1];
      break;
    }
    case VariantTag::error: {
      const auto& p1 = detail::require(variant.injection, "error needs an injection gain");
      check_grid(p1.grid);
      detail::add_kdv_block(grid, 0, 0.0, t, nullptr);
      detail::add_trace_outer(grid, p1.samples, 1.0, 0, 0, t);
      op.input = Eigen::VectorXd::Zero(m);
      break;
    }
    case VariantTag::target: {
      detail::add_kdv_block(grid, 0, variant.lambda, t, nullptr);
      op.input = Eigen::VectorXd::Zero(m);
      break;
    }
    case VariantTag::coupled_target: {
      const auto& g = detail::require(variant.coupling, "coupled_target needs the coupling gain");
      if (g.size() != n) throw InvalidArgument("build_operator: coupling gain size does not match grid");
      detail::add_kdv_block(grid, 0, variant.lambda, t, nullptr);
      detail::add_kdv_block(grid, m, variant.lambda, t, nullptr);
      detail::add_trace_outer(grid, g, -1.0, 0, m, t);
      op.blocks = 2;
      op.input = Eigen::VectorXd::Zero(2 * m);
      break;
    }
    case VariantTag::closed_loop: {
      const auto& p1 = detail::require(variant.injection, "closed_loop needs an injection gain");
      const auto& fb = detail::require(variant.feedback, "closed_loop needs a feedback row");
      check_grid(p1.grid);
      check_grid(fb.grid);
      const Eigen::VectorXd c = detail::feedback_weights(fb);
      detail::add_kdv_block(grid, 0, 0.0, t, &b0);
      detail::add_kdv_block(grid, m, 0.0, t, nullptr);
      detail::add_boundary_feedback(b0, c, 0, m, t);   // u(0) = kappa
      detail::add_boundary_feedback(b0, c, m, m, t);   // uhat(0) = kappa
      detail::add_trace_outer(grid, p1.samples, -1.0, m, 0, t);  // -p1 y
      detail::add_trace_outer(grid, p1.samples, 1.0, m, m, t);   // +p1 yhat
      op.blocks = 2;
      op.input = Eigen::VectorXd::Zero(2 * m);
      break;
    }
  }
  const Eigen::Index dim = m * static_cast<Eigen::Index>(op.blocks);
  op.matrix.resize(dim, dim);
  op.matrix.setFromTriplets(t.begin(), t.end());
  op.matrix.makeCompressed();
  return op;
}

/// u_xx(L) from the 4-point one-sided stencil (2, -5, 4, -1)/h^2.
inline double trace_second_derivative(const Field& f) {
  const std::size_t n = f.size();
  if (n < 7) throw InvalidArgument("trace_second_derivative: need at least 7 nodes");
  const double h = f.grid.spacing();
  const auto& s = f.samples;
  return (2.0 * s[n - 1] - 5.0 * s[n - 2] + 4.0 * s[n - 3] - s[n - 4]) / (h * h);
}

/// u_x(0) from the 3-point one-sided stencil.
inline double left_slope(const Field& f) {
  const double h = f.grid.spacing();
  const auto& s = f.samples;
  return (-3.0 * s[0] + 4.0 * s[1] - s[2]) / (2.0 * h);
}

// Left boundary value of each block implied by the state (kappa for plant-like
// blocks under feedback, 0 for homogeneous blocks).
inline std::vector<double> boundary_values(const DiscreteOperator& op, const Eigen::VectorXd& state,
                                           double external) {
  const auto m = static_cast<Eigen::Index>(op.interior());
  switch (op.variant.tag) {
    case VariantTag::plant:
      if (op.variant.feedback) return {detail::feedback_weights(*op.variant.feedback).dot(state)};
      return {external};
    case VariantTag::time_derivative: return {external};
    case VariantTag::observer: return {detail::feedback_weights(*op.variant.feedback).dot(state)};
    case VariantTag::closed_loop: {
      const double kappa = detail::feedback_weights(*op.variant.feedback).dot(state.segment(m, m));
      return {kappa, kappa};
    }
    case VariantTag::coupled_target: return {0.0, 0.0};
    default: return {0.0};
  }
}

inline Field field_from_interior(const IntervalGrid& grid, const Eigen::Ref<const Eigen::VectorXd>& v,
                                 double left) {
  std::vector<double> s(grid.size(), 0.0);
  s[0] = left;
  for (Eigen::Index i = 0; i < v.size(); ++i) s[static_cast<std::size_t>(i) + 1] = v(i);
  return Field(grid, std::move(s));
}

struct StateSnapshot {
  double t = 0.0;
  std::vector<Field> fields;         // one per block, boundary nodes filled in
  std::vector<double> traces;        // f_xx(L) per field
  std::vector<double> left_slopes;   // f_x(0) per field
};

struct TimeSettings {
  double dt = 0.0;
  double horizon = 0.0;
};

struct Trajectory {
  TimeSettings settings;
  VariantTag tag = VariantTag::plant;
  std::vector<StateSnapshot> snapshots;

  std::size_t size() const noexcept { return snapshots.size(); }
  std::vector<double> times() const {
    std::vector<double> t;
    t.reserve(snapshots.size());
    for (const auto& s : snapshots) t.push_back(s.t);
    return t;
  }
};

inline StateSnapshot make_snapshot(const DiscreteOperator& op, double t, const Eigen::VectorXd& state,
                                   double external) {
  StateSnapshot snap;
  snap.t = t;
  const auto m = static_cast<Eigen::Index>(op.interior());
  const auto left = boundary_values(op, state, external);
  for (std::size_t b = 0; b < op.blocks; ++b) {
    snap.fields.push_back(field_from_interior(op.grid, state.segment(static_cast<Eigen::Index>(b) * m, m), left[b]));
    snap.traces.push_back(trace_second_derivative(snap.fields.back()));
    snap.left_slopes.push_back(left_slope(snap.fields.back()));
  }
  return snap;
}

// External scalar input as a function of time (kappa, y or kappa_dot).
using InputSignal = std::function<double(double)>;

/// Piecewise-linear interpolation of a sampled series, held constant outside.
class InputSeries {
 public:
  InputSeries(std::vector<double> times, std::vector<double> values)
      : times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() != values_.size() || times_.empty()) {
      throw InvalidArgument("InputSeries: need matching, non-empty time and value lists");
    }
    for (std::size_t i = 1; i < times_.size(); ++i) {
      if (!(times_[i] > times_[i - 1])) throw InvalidArgument("InputSeries: times must increase");
    }
  }

  double operator()(double t) const {
    if (t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - times_.begin());
    const double s = (t - times_[j - 1]) / (times_[j] - times_[j - 1]);
    return (1.0 - s) * values_[j - 1] + s * values_[j];
  }

  // Slope of the interpolant (right derivative at knots).
  double derivative(double t) const {
    if (times_.size() < 2 || t < times_.front() || t >= times_.back()) return 0.0;
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - times_.begin());
    return (values_[j] - values_[j - 1]) / (times_[j] - times_[j - 1]);
  }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

/// Two-stage SDIRK, gamma = 1 - 1/sqrt(2): L-stable, second order, stiffly
/// accurate. The stage matrix I - gamma dt A is factored once.
class Stepper {
 public:
  Stepper(const DiscreteOperator& op, double dt) : op_(&op), dt_(dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("Stepper: dt must be positive");
    Eigen::SparseMatrix<double> I(op.matrix.rows(), op.matrix.cols());
    I.setIdentity();
    const Eigen::SparseMatrix<double> M = I - (gamma * dt) * op.matrix;
    lu_.analyzePattern(M);
    lu_.factorize(M);
    if (lu_.info() != Eigen::Success) throw StepFailure("Stepper: stage matrix is singular");
  }

  static constexpr double gamma = 0.29289321881345247559915563789515;  // 1 - 1/sqrt(2)

  double dt() const noexcept { return dt_; }

  // Advances from t to t + dt; `input` is sampled at the stage times.
  Eigen::VectorXd advance(const Eigen::VectorXd& y, double t, const InputSignal& input) const {
    const bool forced = input && op_->has_external_input();
    Eigen::VectorXd rhs = op_->matrix * y;
    if (forced) rhs += op_->input * input(t + gamma * dt_);
    const Eigen::VectorXd k1 = lu_.solve(rhs);
    const Eigen::VectorXd y2 = y + dt_ * (1.0 - gamma) * k1;
    rhs = op_->matrix * y2;
    if (forced) rhs += op_->input * input(t + dt_);
    const Eigen::VectorXd k2 = lu_.solve(rhs);
    Eigen::VectorXd out = y2 + dt_ * gamma * k2;
    if (!out.allFinite()) throw StepFailure("Stepper: non-finite state");
    return out;
  }

 private:
  const DiscreteOperator* op_;
  double dt_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

inline Eigen::VectorXd stack_interior(const DiscreteOperator& op, const std::vector<Field>& fields) {
  if (fields.size() != op.blocks) throw InvalidArgument("state has the wrong number of fields");
  const auto m = static_cast<Eigen::Index>(op.interior());
  Eigen::VectorXd y(m * static_cast<Eigen::Index>(op.blocks));
  for (std::size_t b = 0; b < op.blocks; ++b) {
    detail::require_same_grid(op.grid, fields[b].grid, "stack_interior");
    for (Eigen::Index i = 0; i < m; ++i) {
      y(static_cast<Eigen::Index>(b) * m + i) = fields[b].samples[static_cast<std::size_t>(i) + 1];
    }
  }
  return y;
}

/// One step with the boundary input held at `kappa` over the step.
inline StateSnapshot step(const DiscreteOperator& op, const StateSnapshot& state, double dt, double kappa) {
  const Stepper stepper(op, dt);
  const InputSignal hold = [kappa](double) { return kappa; };
  const Eigen::VectorXd next = stepper.advance(stack_interior(op, state.fields), state.t, hold);
  return make_snapshot(op, state.t + dt, next, kappa);
}

/// Right-end compatibility: |f(L)| <= 1e-8 max|f|, and the one-sided f_x(L)
/// small against max|f_x| up to a stencil allowance of 10 (h/L)^2.
inline void check_right_end(const Field& f, const char* who) {
  double scale = 0.0;
  for (double v : f.samples) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return;
  const std::size_t n = f.size();
  const double h = f.grid.spacing();
  const double L = f.grid.length();
  if (std::abs(f.samples[n - 1]) > 1e-8 * scale) {
    throw InvalidArgument(std::string(who) + ": initial data violates u(L) = 0");
  }
  double slope_scale = 0.0;
  for (double v : derivative_samples(f.grid, f.samples, 1)) slope_scale = std::max(slope_scale, std::abs(v));
  const double slope = std::abs((3.0 * f.samples[n - 1] - 4.0 * f.samples[n - 2] + f.samples[n - 3]) / (2.0 * h));
  if (slope > (1e-8 + 10.0 * (h / L) * (h / L)) * slope_scale) {
    throw InvalidArgument(std::string(who) + ": initial data violates u_x(L) = 0");
  }
}

inline std::size_t step_count(const TimeSettings& ts) {
  if (!(ts.dt > 0.0) || !(ts.horizon >= 0.0)) throw InvalidArgument("simulate: need dt > 0 and T >= 0");
  return static_cast<std::size_t>(std::floor(ts.horizon / ts.dt + 1e-9));
}

/// Runs the variant from `initial` (one field per block). The left node of
/// each initial field is ignored; it is implied by the boundary condition.
inline Trajectory simulate(const DiscreteOperator& op, const std::vector<Field>& initial, const TimeSettings& ts,
                           const InputSignal& input = {}) {
  for (const auto& f : initial) check_right_end(f, "simulate");
  if (op.has_external_input() && !input) throw InvalidArgument("simulate: variant needs an external input signal");
  const std::size_t steps = step_count(ts);
  Trajectory traj{ts, op.variant.tag, {}};
  traj.snapshots.reserve(steps + 1);
  Eigen::VectorXd y = stack_interior(op, initial);
  auto ext = [&](double t) { return input ? input(t) : 0.0; };
  traj.snapshots.push_back(make_snapshot(op, 0.0, y, ext(0.0)));
  if (steps == 0) return traj;
  const Stepper stepper(op, ts.dt);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t0 = static_cast<double>(k - 1) * ts.dt;
    const double t1 = static_cast<double>(k) * ts.dt;
    y = stepper.advance(y, t0, input);
    traj.snapshots.push_back(make_snapshot(op, t1, y, ext(t1)));
  }
  return traj;
}

/// v = u_t for the plant with boundary input kappa: v(0,x) = -u0''' - u0',
/// v(t,0) = kappa'(t).
inline Trajectory simulate_time_derivative(const IntervalGrid& grid, const Field& u0, const InputSeries& kappa,
                                           const TimeSettings& ts) {
  if (grid.size() < 9) throw InvalidArgument("simulate_time_derivative: need at least 9 nodes");
  detail::require_same_grid(grid, u0.grid, "simulate_time_derivative");
  const auto d1 = derivative_samples(grid, u0.samples, 1);
  const auto d3 = derivative_samples(grid, u0.samples, 3);
  std::vector<double> v0(grid.size());
  for (std::size_t i = 0; i < v0.size(); ++i) v0[i] = -d3[i] - d1[i];
  // v0 at the right end is only as small as the stencil error, so the
  // compatibility check applies to u0, not to v0.
  check_right_end(u0, "simulate_time_derivative");
  v0.back() = 0.0;
  const DiscreteOperator op = build_operator(grid, SystemVariant::time_derivative());
  const InputSignal kdot = [&kappa](double t) { return kappa.derivative(t); };
  const std::size_t steps = step_count(ts);
  Trajectory traj{ts, VariantTag::time_derivative, {}};
  Eigen::VectorXd y = stack_interior(op, {Field(grid, v0)});
  traj.snapshots.push_back(make_snapshot(op, 0.0, y, kdot(0.0)));
  if (steps == 0) return traj;
  const Stepper stepper(op, ts.dt);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t1 = static_cast<double>(k) * ts.dt;
    y = stepper.advance(y, static_cast<double>(k - 1) * ts.dt, kdot);
    traj.snapshots.push_back(make_snapshot(op, t1, y, kdot(t1)));
  }
  return traj;
}

/// g(x) = p1(x) - \int_x^L k(x,y) p1(y) dy, the gain coupling the two target blocks.
inline std::vector<double> coupling_gain(const GainKernel& k, const InjectionGain& p1) {
  return apply_volterra(k, Field(p1.grid, p1.samples)).samples;
}

}  // namespace kdvbs
