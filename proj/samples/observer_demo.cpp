// Prints |u|, |uhat| and |u - uhat| of a closed-loop run: the observer starts
// at zero, catches up with the plant, and both decay.
#include <cstdio>

#include "kdvbs/scenario.hpp"

int main(int argc, char** argv) {
  using namespace kdvbs;
  const double lambda = argc > 1 ? std::atof(argv[1]) : 1.0;
  const auto grid = build_interval_grid(1.0, 101);
  const auto k = solve_gain_kernel(TriangleGrid(grid), lambda);
  const auto p1 = injection_gain(observer_kernel_from_gain(k));
  const auto op = build_operator(grid, SystemVariant::closed_loop(p1, feedback_gain_row(k)));

  SimConfig c;
  const auto traj = simulate(op, {initial_profile(c, grid), Field::zeros(grid)}, TimeSettings{grid.spacing(), 0.2});

  std::printf("%8s %12s %12s %12s %12s\n", "t", "|u|", "|uhat|", "|u-uhat|", "u_xx(L)");
  for (std::size_t s = 0; s < traj.size(); s += 2) {
    const auto& snap = traj.snapshots[s];
    std::vector<double> err(grid.size());
    for (std::size_t i = 0; i < err.size(); ++i) err[i] = snap.fields[0].samples[i] - snap.fields[1].samples[i];
    std::printf("%8.3f %12.4e %12.4e %12.4e %12.4e\n", snap.t, l2_norm(grid, snap.fields[0].samples),
                l2_norm(grid, snap.fields[1].samples), l2_norm(grid, err), snap.traces[0]);
  }
}
