#pragma once

#include <span>
#include <vector>

#include "safekernel/dynamics.hpp"
#include "safekernel/value_function.hpp"

namespace safekernel {

/// l(x, y, theta) = distance to the disk centre minus its radius.
ValueFunction signed_distance_payoff(const KeepOutDisk& obstacle, const Grid3& grid);

struct SolverSettings {
  double cfl = 0.9;      // fraction of the stable step, must be in (0, 1]
  double tol = -1.0;     // on max |V_next - V| / dt; <= 0 means 1e-3 * range(l)
  double t_max = 20.0;   // pseudo-time cap
};

/// Default grid: 121 x 121 x 60 over [-15, 15]^2 x [-pi, pi).
Grid3 default_grid();

/// Solves the avoid-only HJI variational inequality to its infinite-horizon
/// limit with a first-order upwind / global Lax-Friedrichs scheme and
/// forward-Euler pseudo-time steps:
///
///   V <- min(l, V + dt * (H(x, avg grad) + sum_i a_i (D+_i V - D-_i V) / 2))
///
/// Stops when the pseudo-time rate max |V_next - V| / dt drops below tol, or
/// when t_max is reached; in the latter case the partial solution is returned
/// with converged = false. `residual` holds the last rate.
ValueFunction solve_hji(const ValueFunction& payoff, const DubinsParams& params,
                        const SolverSettings& settings = {});

/// One converged value function per omega, all on the same grid and the same
/// origin-centred payoff. Throws Error(non_convergence) if any member fails
/// to converge.
std::vector<ValueFunction> build_library(std::span<const double> omegas, double obstacle_radius,
                                         const Grid3& grid, const SolverSettings& settings = {},
                                         double speed = 3.0);

/// True iff candidate <= margin wherever reference <= 0, i.e. the candidate's
/// unsafe region covers the reference's. A negative margin selects
/// cell_value_tolerance(reference).
bool is_superset_reachable(const ValueFunction& candidate, const ValueFunction& reference,
                           double margin = -1.0);

/// Value of an origin-centred value function for a robot relative to a disk
/// centred at (cx, cy). Disks are rotation invariant, so theta is unchanged.
InterpolatedValue evaluate_relative(const ValueFunction& canonical, const State& s,
                                    const KeepOutDisk& obstacle);
InterpolatedGradient gradient_relative(const ValueFunction& canonical, const State& s,
                                       const KeepOutDisk& obstacle);

}  // namespace safekernel
