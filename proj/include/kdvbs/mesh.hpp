// Uniform grids on [0,L] and on the triangle {0 <= x <= y <= L}, trapezoid
// quadrature, and finite-difference helpers used by every other module.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kdvbs/errors.hpp"

namespace kdvbs {

class IntervalGrid {
 public:
  IntervalGrid(double length, std::size_t n) : length_(length), nodes_(n) {
    if (!(length > 0.0) || !std::isfinite(length)) {
      throw InvalidArgument("IntervalGrid: length must be positive and finite");
    }
    if (n < 5) throw InvalidArgument("IntervalGrid: need at least 5 nodes");
    spacing_ = length / static_cast<double>(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) nodes_[i] = static_cast<double>(i) * spacing_;
    nodes_[n - 1] = length;  // anchored, not accumulated
  }

  double length() const noexcept { return length_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  double spacing() const noexcept { return spacing_; }
  double node(std::size_t i) const { return nodes_.at(i); }
  const std::vector<double>& nodes() const noexcept { return nodes_; }

  friend bool operator==(const IntervalGrid& a, const IntervalGrid& b) {
    return a.length_ == b.length_ && a.nodes_.size() == b.nodes_.size();
  }

 private:
  double length_;
  double spacing_ = 0.0;
  std::vector<double> nodes_;
};

inline IntervalGrid build_interval_grid(double length, std::size_t n) { return {length, n}; }

// Nodes (i, j) with i <= j, so x_i <= y_j. Stored row by row in i.
class TriangleGrid {
 public:
  explicit TriangleGrid(IntervalGrid base) : base_(std::move(base)) {}

  const IntervalGrid& base() const noexcept { return base_; }
  std::size_t edge_size() const noexcept { return base_.size(); }
  std::size_t size() const noexcept {
    const std::size_t n = base_.size();
    return n * (n + 1) / 2;
  }

  std::size_t index(std::size_t i, std::size_t j) const {
    const std::size_t n = base_.size();
    if (i > j || j >= n) throw InvalidArgument("TriangleGrid: node outside triangle");
    return i * n - i * (i - 1) / 2 + (j - i);
  }

  bool is_diagonal(std::size_t i, std::size_t j) const noexcept { return i == j; }
  bool is_top_edge(std::size_t, std::size_t j) const noexcept { return j + 1 == base_.size(); }
  bool is_left_edge(std::size_t i, std::size_t) const noexcept { return i == 0; }

  template <class Fn>
  void for_each_node(Fn&& fn) const {
    const std::size_t n = base_.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) fn(i, j);
  }

  friend bool operator==(const TriangleGrid& a, const TriangleGrid& b) { return a.base_ == b.base_; }

 private:
  IntervalGrid base_;
};

struct QuadratureRule {
  std::vector<double> weights;
};

inline QuadratureRule trapezoid_rule(const IntervalGrid& grid) {
  QuadratureRule rule{std::vector<double>(grid.size(), grid.spacing())};
  rule.weights.front() = 0.5 * grid.spacing();
  rule.weights.back() = 0.5 * grid.spacing();
  return rule;
}

inline void require_samples(const IntervalGrid& grid, std::span<const double> samples,
                            const char* who) {
  if (samples.size() != grid.size()) {
    throw InvalidArgument(std::string(who) + ": sample count does not match grid");
  }
}

// Trapezoid approximation of the integral of f over [x_from, L].
inline double integrate(const IntervalGrid& grid, std::span<const double> samples,
                        std::size_t from_index = 0) {
  require_samples(grid, samples, "integrate");
  if (from_index >= grid.size()) throw InvalidArgument("integrate: from_index out of range");
  const std::size_t n = grid.size();
  if (from_index == n - 1) return 0.0;
  double interior = 0.0;
  for (std::size_t i = from_index + 1; i + 1 < n; ++i) interior += samples[i];
  return grid.spacing() * (0.5 * (samples[from_index] + samples[n - 1]) + interior);
}

// Square of the discrete L2 norm, trapezoid weighted.
inline double squared_l2(const IntervalGrid& grid, std::span<const double> samples) {
  require_samples(grid, samples, "squared_l2");
  const auto w = trapezoid_rule(grid).weights;
  double acc = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) acc += w[i] * samples[i] * samples[i];
  return acc;
}

inline double l2_norm(const IntervalGrid& grid, std::span<const double> samples) {
  return std::sqrt(squared_l2(grid, samples));
}

/// Finite-difference weights for the m-th derivative at z from the nodes x
/// (Fornberg's recursion). Exact for polynomials of degree < x.size().
inline std::vector<double> fd_weights(double z, std::span<const double> x, int m) {
  const std::size_t n = x.size();
  if (m < 0 || static_cast<std::size_t>(m) >= n) {
    throw InvalidArgument("fd_weights: derivative order must be below the stencil size");
  }
  const std::size_t mm = static_cast<std::size_t>(m);
  std::vector<std::vector<double>> c(n, std::vector<double>(mm + 1, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t mn = std::min(i, mm);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k) {
          c[i][k] = c1 * (static_cast<double>(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        }
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k) {
        c[j][k] = (c4 * c[j][k] - static_cast<double>(k) * c[j][k - 1]) / c3;
      }
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = c[i][mm];
  return out;
}

/// First index of a `width`-point window centered on `pos` (shifted by
/// `shift`) and clipped into [lo, hi]; nullopt when the range is too short.
inline std::optional<std::size_t> stencil_window(std::size_t pos, std::size_t lo, std::size_t hi,
                                                 std::size_t width, long shift = 0) {
  if (hi < lo || hi - lo + 1 < width) return std::nullopt;
  long start = static_cast<long>(pos) - static_cast<long>((width - 1) / 2) + shift;
  start = std::clamp(start, static_cast<long>(lo), static_cast<long>(hi - width + 1));
  return static_cast<std::size_t>(start);
}

// Weights of a stencil on unit-spaced integer offsets relative to `pos`,
// scaled to spacing h.
inline std::vector<double> grid_stencil(std::size_t first, std::size_t width, std::size_t pos,
                                        int order, double h) {
  std::vector<double> offsets(width);
  for (std::size_t q = 0; q < width; ++q) {
    offsets[q] = static_cast<double>(static_cast<long>(first + q) - static_cast<long>(pos));
  }
  auto w = fd_weights(0.0, offsets, order);
  const double scale = std::pow(h, -order);
  for (double& v : w) v *= scale;
  return w;
}

/// Nodal derivative of order 1, 2 or 3. Centered in the interior; at the
/// ends one-sided stencils with (order + 2) points, which keeps second-order
/// accuracy everywhere.
inline std::vector<double> derivative_samples(const IntervalGrid& grid,
                                              std::span<const double> samples, int order) {
  require_samples(grid, samples, "derivative_samples");
  if (order < 1 || order > 3) throw InvalidArgument("derivative_samples: order must be 1, 2 or 3");
  const std::size_t n = grid.size();
  if (n < 7) throw InvalidArgument("derivative_samples: need at least 7 nodes");
  const std::size_t interior_width = (order % 2 == 1) ? static_cast<std::size_t>(order) + 2
                                                      : static_cast<std::size_t>(order) + 1;
  const std::size_t boundary_width = static_cast<std::size_t>(order) + 2;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t half = (interior_width - 1) / 2;
    const bool centered = i >= half && i + half < n;
    const std::size_t width = centered ? interior_width : boundary_width;
    const std::size_t first = *stencil_window(i, 0, n - 1, width);
    const auto w = grid_stencil(first, width, i, order, grid.spacing());
    double acc = 0.0;
    for (std::size_t q = 0; q < width; ++q) acc += w[q] * samples[first + q];
    out[i] = acc;
  }
  return out;
}

}  // namespace kdvbs
