#pragma once

#include <map>
#include <memory>
#include <utility>

#include "safekernel/reachability.hpp"

namespace safekernel::testing {

/// Converged canonical value function on the default grid, solved once per
/// (omega, radius) and process.
inline std::shared_ptr<const ValueFunction> canonical_vf(double omega, double radius = 2.25) {
  static std::map<std::pair<double, double>, std::shared_ptr<const ValueFunction>> cache;
  auto& slot = cache[{omega, radius}];
  if (!slot) {
    const Grid3 grid = default_grid();
    ValueFunction vf = solve_hji(signed_distance_payoff({0.0, 0.0, radius}, grid), DubinsParams{3.0, omega});
    vf.obstacle_radius = radius;
    slot = std::make_shared<const ValueFunction>(std::move(vf));
  }
  return slot;
}

/// Value function holding f(x, y, theta) at every node of `grid`.
template <class F>
ValueFunction field(const Grid3& grid, F&& f, double omega = 1.0) {
  ValueFunction vf;
  vf.grid = grid;
  vf.omega_max = omega;
  vf.values.resize(grid.size());
  for (int i = 0; i < grid.dims[0]; ++i) {
    for (int j = 0; j < grid.dims[1]; ++j) {
      for (int k = 0; k < grid.dims[2]; ++k) {
        vf.values[grid.index(i, j, k)] = f(grid.coordinate(0, i), grid.coordinate(1, j), grid.coordinate(2, k));
      }
    }
  }
  return vf;
}

}  // namespace safekernel::testing
