// Volterra transformations f -> f - \int_x^L K(x,y) f(y) dy on nodal fields
// and their exact discrete inverses.
#pragma once

#include <cstddef>
#include <vector>

#include "kdvbs/errors.hpp"
#include "kdvbs/kernels.hpp"
#include "kdvbs/mesh.hpp"

namespace kdvbs {

struct Field {
  IntervalGrid grid;
  std::vector<double> samples;

  Field(IntervalGrid g, std::vector<double> s) : grid(std::move(g)), samples(std::move(s)) {
    require_samples(grid, samples, "Field");
  }

  static Field zeros(const IntervalGrid& g) { return {g, std::vector<double>(g.size(), 0.0)}; }

  template <class Fn>
  static Field sample(const IntervalGrid& g, Fn&& fn) {
    std::vector<double> s(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) s[i] = fn(g.node(i));
    return {g, std::move(s)};
  }

  std::size_t size() const noexcept { return samples.size(); }
};

namespace detail {

inline void require_same_grid(const IntervalGrid& a, const IntervalGrid& b, const char* who) {
  if (!(a == b)) throw InvalidArgument(std::string(who) + ": grid mismatch");
}

// Trapezoid weight of node j in the rule on [x_i, L].
inline double partial_weight(std::size_t i, std::size_t j, std::size_t n, double h) {
  if (i + 1 == n) return 0.0;
  return (j == i || j + 1 == n) ? 0.5 * h : h;
}

}  // namespace detail

/// g(x_i) = f(x_i) - trapezoid of y -> K(x_i, y) f(y) over [x_i, L].
template <class Role>
Field apply_volterra(const TriangleKernel<Role>& kernel, const Field& f) {
  detail::require_same_grid(kernel.grid(), f.grid, "apply_volterra");
  const std::size_t n = f.size();
  const double h = f.grid.spacing();
  Field g = f;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = i; j < n; ++j) {
      acc += detail::partial_weight(i, j, n, h) * kernel.at(i, j) * f.samples[j];
    }
    g.samples[i] -= acc;
  }
  return g;
}

/// Inverse of apply_volterra on the same quadrature: the discrete system is
/// upper triangular, solved by back substitution from x = L.
template <class Role>
Field invert_volterra(const TriangleKernel<Role>& kernel, const Field& g) {
  detail::require_same_grid(kernel.grid(), g.grid, "invert_volterra");
  const std::size_t n = g.size();
  const double h = g.grid.spacing();
  Field f = g;
  for (std::size_t ii = n; ii-- > 0;) {
    double acc = 0.0;
    for (std::size_t j = ii + 1; j < n; ++j) {
      acc += detail::partial_weight(ii, j, n, h) * kernel.at(ii, j) * f.samples[j];
    }
    const double diag = 1.0 - detail::partial_weight(ii, ii, n, h) * kernel.at(ii, ii);
    if (diag == 0.0) throw NumericFailure("invert_volterra: singular diagonal");
    f.samples[ii] = (g.samples[ii] + acc) / diag;
  }
  return f;
}

/// kappa = \int_0^L k(0,y) uhat(y) dy.
inline double feedback_control(const FeedbackGainRow& row, const Field& uhat) {
  detail::require_same_grid(row.grid, uhat.grid, "feedback_control");
  std::vector<double> prod(uhat.size());
  for (std::size_t j = 0; j < prod.size(); ++j) prod[j] = row.samples[j] * uhat.samples[j];
  return integrate(uhat.grid, prod);
}

}  // namespace kdvbs
