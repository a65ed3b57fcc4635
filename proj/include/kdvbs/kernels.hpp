// Backstepping kernels on the triangle T = {0 <= x <= y <= L}.
//
// The gain kernel k solves
//     k_xxx + k_yyy + k_x + k_y = -lambda k   in T,
//     k(x,L) = 0,  k(x,x) = 0,  k_x(x,x) = lambda (L - x) / 3,
// and the observer kernel p is its reflection p(x,y) = k(L-y, L-x), which
// solves
//     p_xxx + p_yyy + p_x + p_y = lambda p,
//     p(x,x) = 0,  p_x(x,x) = lambda x / 3,  p(0,y) = 0.
//
// The kernel equation is a Cauchy problem for an elliptic-type operator in
// the characteristic variables (x+y, y-x), so nodal finite-difference least
// squares picks up grid-scale modes that depend on y-x only. The solver fits
// instead a polynomial ansatz whose factor carries the Dirichlet conditions
// exactly,
//     k = (y - x)(L - y) q(x,y),        p = x (y - x) q(x,y),
// with q a Chebyshev tensor polynomial of bounded total degree, by least
// squares on the PDE and slope conditions collocated at every triangle node.
// Nodal samples of the fit are what the rest of the library consumes.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "kdvbs/errors.hpp"
#include "kdvbs/io.hpp"
#include "kdvbs/mesh.hpp"

namespace kdvbs {

struct GainRole {};
struct ObserverRole {};

struct ResidualReport {
  double pde_rms = 0.0;
  double pde_max = 0.0;
  double slope_rms = 0.0;
  double slope_max = 0.0;
  double dirichlet_max = 0.0;  // k(x,L) for the gain kernel, p(0,y) for the observer kernel
  double diagonal_max = 0.0;
  double max_abs_value = 0.0;
  std::size_t pde_points = 0;
  std::size_t slope_points = 0;
  int degree = 0;  // ansatz degree; 0 when the report is a finite-difference re-evaluation
};

class KernelSolveFailure : public std::runtime_error {
 public:
  KernelSolveFailure(const std::string& what, ResidualReport report)
      : std::runtime_error(what), report_(report) {}
  const ResidualReport& report() const noexcept { return report_; }

 private:
  ResidualReport report_;
};

template <class Role>
class TriangleKernel {
 public:
  TriangleKernel(TriangleGrid tri, std::vector<double> values, double lambda,
                 ResidualReport report = {})
      : tri_(std::move(tri)), values_(std::move(values)), lambda_(lambda), report_(report) {
    if (values_.size() != tri_.size()) {
      throw InvalidArgument("TriangleKernel: value count does not match triangle grid");
    }
  }

  const TriangleGrid& tri() const noexcept { return tri_; }
  const IntervalGrid& grid() const noexcept { return tri_.base(); }
  double lambda() const noexcept { return lambda_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const ResidualReport& residual_report() const noexcept { return report_; }

  double at(std::size_t i, std::size_t j) const { return values_[tri_.index(i, j)]; }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  TriangleGrid tri_;
  std::vector<double> values_;
  double lambda_;
  ResidualReport report_;
};

using GainKernel = TriangleKernel<GainRole>;
using ObserverKernel = TriangleKernel<ObserverRole>;

// p1(x_i) = p(x_i, L).
struct InjectionGain {
  IntervalGrid grid;
  std::vector<double> samples;
};

// k(0, y_j), the gain of the boundary feedback.
struct FeedbackGainRow {
  IntervalGrid grid;
  std::vector<double> samples;
};

struct KernelSolveOptions {
  int min_degree = 4;
  int max_degree = 16;
  int degree_step = 2;
};

namespace detail {

template <class Role>
constexpr bool is_gain = std::is_same_v<Role, GainRole>;

// T_a^{(d)} at the grid coordinates mapped to [-1,1]; d/dx carries 2/L.
// table[d][i * (N+1) + a].
inline std::array<std::vector<double>, 4> chebyshev_table(const IntervalGrid& grid, int max_degree) {
  const std::size_t n = grid.size();
  const std::size_t width = static_cast<std::size_t>(max_degree) + 1;
  const double scale = 2.0 / grid.length();
  std::array<std::vector<double>, 4> table;
  for (auto& t : table) t.assign(n * width, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 2.0 * grid.node(i) / grid.length() - 1.0;
    double* row[4];
    for (int d = 0; d < 4; ++d) row[d] = &table[static_cast<std::size_t>(d)][i * width];
    row[0][0] = 1.0;
    if (width > 1) {
      row[0][1] = z;
      row[1][1] = 1.0;
    }
    for (std::size_t a = 1; a + 1 < width; ++a) {
      row[0][a + 1] = 2.0 * z * row[0][a] - row[0][a - 1];
      for (int d = 1; d < 4; ++d) {
        row[d][a + 1] = 2.0 * d * row[d - 1][a] + 2.0 * z * row[d][a] - row[d][a - 1];
      }
    }
    for (int d = 1; d < 4; ++d) {
      const double f = std::pow(scale, d);
      for (std::size_t a = 0; a < width; ++a) row[d][a] *= f;
    }
  }
  return table;
}

// Derivatives of the Dirichlet factor B up to total order 2 (B is quadratic).
struct FactorDerivs {
  double b[3][3] = {};  // b[dx][dy]
};

template <class Role>
FactorDerivs factor_derivs(double x, double y, double L) {
  FactorDerivs f;
  if constexpr (is_gain<Role>) {
    f.b[0][0] = (y - x) * (L - y);
    f.b[1][0] = -(L - y);
    f.b[0][1] = L - 2.0 * y + x;
    f.b[1][1] = -1.0;
    f.b[0][2] = -2.0;
  } else {
    f.b[0][0] = x * (y - x);
    f.b[1][0] = y - 2.0 * x;
    f.b[0][1] = x;
    f.b[2][0] = -2.0;
    f.b[1][1] = 1.0;
  }
  return f;
}

struct AnsatzSystem {
  Eigen::MatrixXd pde;         // one row per triangle node
  Eigen::MatrixXd slope;       // one row per diagonal node
  Eigen::VectorXd slope_rhs;
  Eigen::MatrixXd value;       // kernel value per triangle node
};

template <class Role>
AnsatzSystem assemble_ansatz(const TriangleGrid& tri, double lambda, int degree,
                             const std::array<std::vector<double>, 4>& cheb, int table_degree) {
  const IntervalGrid& grid = tri.base();
  const std::size_t n = grid.size();
  const double L = grid.length();
  const std::size_t width = static_cast<std::size_t>(table_degree) + 1;
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a <= degree; ++a)
    for (int b = 0; a + b <= degree; ++b) pairs.emplace_back(a, b);
  const auto cols = static_cast<Eigen::Index>(pairs.size());

  AnsatzSystem sys;
  sys.pde.resize(static_cast<Eigen::Index>(tri.size()), cols);
  sys.value.resize(static_cast<Eigen::Index>(tri.size()), cols);
  sys.slope.resize(static_cast<Eigen::Index>(n), cols);
  sys.slope_rhs.resize(static_cast<Eigen::Index>(n));

  const double reaction = is_gain<Role> ? lambda : -lambda;
  auto T = [&](int d, std::size_t i, int a) {
    return cheb[static_cast<std::size_t>(d)][i * width + static_cast<std::size_t>(a)];
  };
  // d^{dx+dy}(B Q)/dx^dx dy^dy for dx*dy == 0 and order <= 3.
  auto derivative = [&](const FactorDerivs& f, std::size_t i, std::size_t j, int a, int b,
                        int dx, int dy) {
    static constexpr int binom[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
    double acc = 0.0;
    if (dy == 0) {
      for (int m = 0; m <= std::min(dx, 2); ++m)
        acc += binom[dx][m] * f.b[m][0] * T(dx - m, i, a) * T(0, j, b);
    } else {
      for (int m = 0; m <= std::min(dy, 2); ++m)
        acc += binom[dy][m] * f.b[0][m] * T(0, i, a) * T(dy - m, j, b);
    }
    return acc;
  };

  tri.for_each_node([&](std::size_t i, std::size_t j) {
    const auto r = static_cast<Eigen::Index>(tri.index(i, j));
    const FactorDerivs f = factor_derivs<Role>(grid.node(i), grid.node(j), L);
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto [a, b] = pairs[static_cast<std::size_t>(c)];
      const double v = derivative(f, i, j, a, b, 0, 0);
      sys.value(r, c) = v;
      sys.pde(r, c) = derivative(f, i, j, a, b, 3, 0) + derivative(f, i, j, a, b, 0, 3) +
                      derivative(f, i, j, a, b, 1, 0) + derivative(f, i, j, a, b, 0, 1) +
                      reaction * v;
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const FactorDerivs f = factor_derivs<Role>(grid.node(i), grid.node(i), L);
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto [a, b] = pairs[static_cast<std::size_t>(c)];
      sys.slope(r, c) = derivative(f, i, i, a, b, 1, 0);
    }
    sys.slope_rhs(r) = is_gain<Role> ? lambda * (L - grid.node(i)) / 3.0 : lambda * grid.node(i) / 3.0;
  }
  return sys;
}

inline double rms(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

inline double max_abs(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

template <class Role>
TriangleKernel<Role> solve_triangle_kernel(const TriangleGrid& tri, double lambda, double tol,
                                           const KernelSolveOptions& opts) {
  const IntervalGrid& grid = tri.base();
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("kernel solve: lambda must be >= 0");
  if (!(tol > 0.0)) throw InvalidArgument("kernel solve: tol must be positive");
  if (grid.size() < 21) throw InvalidArgument("kernel solve: need at least 21 nodes per edge");
  if (opts.min_degree < 0 || opts.max_degree < opts.min_degree || opts.degree_step < 1) {
    throw InvalidArgument("kernel solve: bad degree range");
  }

  const auto cheb = chebyshev_table(grid, opts.max_degree);
  const double slope_scale = std::max(1.0, lambda * grid.length() / 3.0);

  double best_score = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_values;
  ResidualReport best_report;

  for (int degree = opts.min_degree; degree <= opts.max_degree; degree += opts.degree_step) {
    AnsatzSystem sys = assemble_ansatz<Role>(tri, lambda, degree, cheb, opts.max_degree);
    const Eigen::Index rows = sys.pde.rows() + sys.slope.rows();
    Eigen::MatrixXd A(rows, sys.pde.cols());
    A << sys.pde, sys.slope;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
    rhs.tail(sys.slope.rows()) = sys.slope_rhs;

    Eigen::VectorXd col_scale = A.colwise().norm().transpose();
    for (Eigen::Index c = 0; c < col_scale.size(); ++c) {
      if (col_scale(c) == 0.0) col_scale(c) = 1.0;
    }
    const Eigen::MatrixXd scaled = A * col_scale.cwiseInverse().asDiagonal();
    Eigen::VectorXd coeff = scaled.colPivHouseholderQr().solve(rhs);
    coeff = coeff.cwiseQuotient(col_scale);
    if (!coeff.allFinite()) continue;

    Eigen::VectorXd values = sys.value * coeff;
    tri.for_each_node([&](std::size_t i, std::size_t j) {
      const bool pinned = i == j || (is_gain<Role> ? j + 1 == grid.size() : i == 0);
      if (pinned) values(static_cast<Eigen::Index>(tri.index(i, j))) = 0.0;
    });

    const Eigen::VectorXd pde_res = sys.pde * coeff;
    const Eigen::VectorXd slope_res = sys.slope * coeff - sys.slope_rhs;
    ResidualReport rep;
    rep.pde_rms = rms(pde_res);
    rep.pde_max = max_abs(pde_res);
    rep.slope_rms = rms(slope_res);
    rep.slope_max = max_abs(slope_res);
    rep.max_abs_value = max_abs(values);
    rep.pde_points = static_cast<std::size_t>(pde_res.size());
    rep.slope_points = static_cast<std::size_t>(slope_res.size());
    rep.degree = degree;

    const double score = std::max(rep.pde_rms / std::max(1.0, rep.max_abs_value),
                                  rep.slope_rms / slope_scale);
    // Higher degrees are worse conditioned; only take them for a clear gain.
    if (score < 0.5 * best_score) {
      best_score = score;
      best_values = std::move(values);
      best_report = rep;
    }
  }

  if (best_values.size() == 0) {
    throw KernelSolveFailure("kernel solve: least squares produced no finite solution", {});
  }
  if (best_report.pde_rms > tol * std::max(1.0, best_report.max_abs_value) ||
      best_report.slope_rms > tol * slope_scale) {
    throw KernelSolveFailure("kernel solve: residual above tolerance (pde_rms=" +
                                 format_number(best_report.pde_rms) +
                                 ", slope_rms=" + format_number(best_report.slope_rms) + ")",
                             best_report);
  }
  return TriangleKernel<Role>(tri, std::vector<double>(best_values.data(), best_values.data() + best_values.size()),
                              lambda, best_report);
}

}  // namespace detail

inline GainKernel solve_gain_kernel(const TriangleGrid& tri, double lambda, double tol = 1e-6,
                                    const KernelSolveOptions& opts = {}) {
  return detail::solve_triangle_kernel<GainRole>(tri, lambda, tol, opts);
}

/// Solves the observer-kernel system directly, without going through the
/// reflection of the gain kernel.
inline ObserverKernel solve_observer_kernel(const TriangleGrid& tri, double lambda, double tol = 1e-6,
                                            const KernelSolveOptions& opts = {}) {
  return detail::solve_triangle_kernel<ObserverRole>(tri, lambda, tol, opts);
}

/// Finite-difference re-evaluation of the kernel system from nodal samples
/// alone: 6-point third-derivative and 4-point first-derivative windows in
/// the PDE, 4-point one-sided slope stencils on the diagonal.
template <class Role>
ResidualReport kernel_residual(const TriangleKernel<Role>& kernel) {
  const IntervalGrid& grid = kernel.grid();
  const std::size_t n = grid.size();
  const double h = grid.spacing();
  const double L = grid.length();
  const double lambda = kernel.lambda();
  constexpr bool gain = detail::is_gain<Role>;
  const double reaction = gain ? lambda : -lambda;

  ResidualReport rep;
  rep.max_abs_value = kernel.max_abs();
  double pde_sq = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      if (gain ? (j + 1 == n) : (i == 0)) continue;
      const auto wx3 = stencil_window(i, 0, j, 6);
      const auto wy3 = stencil_window(j, i, n - 1, 6);
      const auto wx1 = stencil_window(i, 0, j, 4);
      const auto wy1 = stencil_window(j, i, n - 1, 4);
      if (!wx3 || !wy3 || !wx1 || !wy1) continue;
      double r = reaction * kernel.at(i, j);
      auto along_x = [&](std::size_t first, std::size_t width, int order) {
        const auto w = grid_stencil(first, width, i, order, h);
        for (std::size_t q = 0; q < width; ++q) r += w[q] * kernel.at(first + q, j);
      };
      auto along_y = [&](std::size_t first, std::size_t width, int order) {
        const auto w = grid_stencil(first, width, j, order, h);
        for (std::size_t q = 0; q < width; ++q) r += w[q] * kernel.at(i, first + q);
      };
      along_x(*wx3, 6, 3);
      along_y(*wy3, 6, 3);
      along_x(*wx1, 4, 1);
      along_y(*wy1, 4, 1);
      pde_sq += r * r;
      rep.pde_max = std::max(rep.pde_max, std::abs(r));
      ++rep.pde_points;
    }
  }
  rep.pde_rms = rep.pde_points ? std::sqrt(pde_sq / static_cast<double>(rep.pde_points)) : 0.0;

  double slope_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    if (i >= 3) {
      const auto w = grid_stencil(i - 3, 4, i, 1, h);
      for (std::size_t q = 0; q < 4; ++q) d += w[q] * kernel.at(i - 3 + q, i);
    } else if (i + 3 < n) {
      // k_x = -k_y along the diagonal, where k vanishes identically.
      const auto w = grid_stencil(i, 4, i, 1, h);
      for (std::size_t q = 0; q < 4; ++q) d -= w[q] * kernel.at(i, i + q);
    } else {
      continue;
    }
    const double target = gain ? lambda * (L - grid.node(i)) / 3.0 : lambda * grid.node(i) / 3.0;
    const double r = d - target;
    slope_sq += r * r;
    rep.slope_max = std::max(rep.slope_max, std::abs(r));
    ++rep.slope_points;
  }
  rep.slope_rms = rep.slope_points ? std::sqrt(slope_sq / static_cast<double>(rep.slope_points)) : 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    rep.diagonal_max = std::max(rep.diagonal_max, std::abs(kernel.at(i, i)));
    const double edge = gain ? kernel.at(i, n - 1) : kernel.at(0, i);
    rep.dirichlet_max = std::max(rep.dirichlet_max, std::abs(edge));
  }
  return rep;
}

namespace detail {

// (x_i, y_j) -> (L - y_j, L - x_i) is the index map (i, j) -> (n-1-j, n-1-i).
template <class To, class From>
TriangleKernel<To> reflect(const TriangleKernel<From>& src) {
  const TriangleGrid& tri = src.tri();
  const std::size_t n = tri.edge_size();
  std::vector<double> out(tri.size());
  tri.for_each_node([&](std::size_t i, std::size_t j) {
    out[tri.index(i, j)] = src.at(n - 1 - j, n - 1 - i);
  });
  return TriangleKernel<To>(tri, std::move(out), src.lambda(), src.residual_report());
}

}  // namespace detail

inline ObserverKernel observer_kernel_from_gain(const GainKernel& k) {
  return detail::reflect<ObserverRole>(k);
}

inline GainKernel gain_kernel_from_observer(const ObserverKernel& p) {
  return detail::reflect<GainRole>(p);
}

inline InjectionGain injection_gain(const ObserverKernel& p) {
  const std::size_t n = p.tri().edge_size();
  InjectionGain g{p.grid(), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) g.samples[i] = p.at(i, n - 1);
  return g;
}

inline FeedbackGainRow feedback_gain_row(const GainKernel& k) {
  const std::size_t n = k.tri().edge_size();
  FeedbackGainRow row{k.grid(), std::vector<double>(n)};
  for (std::size_t j = 0; j < n; ++j) row.samples[j] = k.at(0, j);
  return row;
}

/// Kernel export: a `# L=.. lambda=.. n=.. residual=..` comment line, the
/// header `x,y,value`, then one row per triangle node.
template <class Role>
void write_kernel_csv(std::ostream& out, const TriangleKernel<Role>& kernel) {
  const IntervalGrid& grid = kernel.grid();
  const ResidualReport& rep = kernel.residual_report();
  out << "# L=" << format_number(grid.length()) << " lambda=" << format_number(kernel.lambda())
      << " n=" << grid.size() << " residual=" << format_number(std::max(rep.pde_rms, rep.slope_rms))
      << "\n";
  out << "x,y,value\n";
  kernel.tri().for_each_node([&](std::size_t i, std::size_t j) {
    out << format_number(grid.node(i)) << ',' << format_number(grid.node(j)) << ','
        << format_number(kernel.at(i, j)) << '\n';
  });
}

}  // namespace kdvbs
