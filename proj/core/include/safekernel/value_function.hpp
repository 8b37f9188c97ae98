#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "safekernel/dynamics.hpp"

namespace safekernel {

/// Regular grid over (x, y, theta). Non-periodic axes include both end
/// points; periodic axes (theta) do not duplicate the wrap-around node.
struct Grid3 {
  std::array<double, 3> mins{};
  std::array<double, 3> maxs{};
  std::array<int, 3> dims{};
  std::array<bool, 3> periodic{false, false, true};

  /// Square grid x, y in [-half_extent, half_extent], theta in [-pi, pi).
  static Grid3 dubins(double half_extent, int nx, int ny, int ntheta);

  void validate() const;

  double spacing(int axis) const;
  double coordinate(int axis, int i) const;
  std::size_t size() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  /// Flat index, theta fastest-varying.
  std::size_t index(int ix, int iy, int itheta) const {
    return (static_cast<std::size_t>(ix) * static_cast<std::size_t>(dims[1]) +
            static_cast<std::size_t>(iy)) *
               static_cast<std::size_t>(dims[2]) +
           static_cast<std::size_t>(itheta);
  }
  bool contains_xy(double x, double y) const {
    return x >= mins[0] && x <= maxs[0] && y >= mins[1] && y <= maxs[1];
  }

  bool operator==(const Grid3&) const = default;
};

struct KeepOutDisk {
  double cx = 0.0;
  double cy = 0.0;
  double r = 1.0;
};

/// A value function V sampled on a Grid3, together with the dynamics
/// parameter and obstacle radius that generated it.
struct ValueFunction {
  Grid3 grid;
  std::vector<double> values;
  double omega_max = 0.0;
  double obstacle_radius = 0.0;
  bool converged = true;
  double residual = 0.0;
  int iterations = 0;

  double at(int ix, int iy, int itheta) const { return values[grid.index(ix, iy, itheta)]; }

  /// Checks sizes and finiteness. Throws on violation.
  void validate() const;
};

struct InterpolatedValue {
  double value = 0.0;
  bool out_of_domain = false;
};

struct InterpolatedGradient {
  Costate gradient;
  bool out_of_domain = false;
};

/// Trilinear interpolation with periodic theta. Positions outside the x/y
/// bounds are clamped to the boundary and flagged.
InterpolatedValue interpolate_value(const ValueFunction& vf, const State& s);

/// Central differences of interpolate_value with half-cell steps per axis.
InterpolatedGradient interpolate_gradient(const ValueFunction& vf, const State& s);

/// Strictly above the level counts as safe; the level set itself is unsafe.
bool is_safe(const ValueFunction& vf, const State& s, double level);

/// Value change across one spatial cell: max(h_x, h_y). The signed-distance
/// payoff and every Dubins avoid value built from it are 1-Lipschitz in x, y.
double cell_value_tolerance(const ValueFunction& vf);

/// Largest gradient norm over grid nodes (central differences, one-sided at
/// non-periodic edges).
double max_gradient_norm(const ValueFunction& vf);

/// 2 * max(h) * max ||grad V||, the band within which grid error can flip a
/// safety verdict.
double grid_epsilon(const ValueFunction& vf);

}  // namespace safekernel
