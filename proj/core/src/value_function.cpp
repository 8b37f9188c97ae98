#include "safekernel/value_function.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "safekernel/errors.hpp"

namespace safekernel {

Grid3 Grid3::dubins(double half_extent, int nx, int ny, int ntheta) {
  Grid3 g;
  g.mins = {-half_extent, -half_extent, -std::numbers::pi};
  g.maxs = {half_extent, half_extent, std::numbers::pi};
  g.dims = {nx, ny, ntheta};
  g.periodic = {false, false, true};
  g.validate();
  return g;
}

void Grid3::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 3) {
      throw Error(ErrorKind::invalid_argument,
                  "grid axis " + std::to_string(a) + " needs at least 3 points, got " +
                      std::to_string(dims[a]));
    }
    if (!(maxs[a] > mins[a])) {
      throw Error(ErrorKind::invalid_argument, "grid axis " + std::to_string(a) + " has max <= min");
    }
  }
  if (periodic[0] || periodic[1] || !periodic[2]) {
    throw Error(ErrorKind::invalid_argument, "only the theta axis may be (and must be) periodic");
  }
}

double Grid3::spacing(int axis) const {
  const double span = maxs[axis] - mins[axis];
  return periodic[axis] ? span / dims[axis] : span / (dims[axis] - 1);
}

double Grid3::coordinate(int axis, int i) const { return mins[axis] + i * spacing(axis); }

void ValueFunction::validate() const {
  grid.validate();
  if (values.size() != grid.size()) {
    throw Error(ErrorKind::schema, "value array has " + std::to_string(values.size()) +
                                       " entries, grid expects " + std::to_string(grid.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::schema, "value function contains non-finite entries");
  }
}

namespace {

struct AxisWeight {
  int i0;
  int i1;
  double t;
};

AxisWeight locate_clamped(const Grid3& g, int axis, double coord, bool& clamped) {
  const int n = g.dims[axis];
  double f = (coord - g.mins[axis]) / g.spacing(axis);
  if (f < 0.0) {
    f = 0.0;
    clamped = true;
  } else if (f > n - 1) {
    f = n - 1;
    clamped = true;
  }
  int i0 = static_cast<int>(std::floor(f));
  if (i0 > n - 2) i0 = n - 2;
  return {i0, i0 + 1, f - i0};
}

AxisWeight locate_periodic(const Grid3& g, int axis, double coord) {
  const int n = g.dims[axis];
  const double span = g.maxs[axis] - g.mins[axis];
  double rel = std::fmod(coord - g.mins[axis], span);
  if (rel < 0.0) rel += span;
  const double f = rel / g.spacing(axis);
  int i0 = static_cast<int>(std::floor(f));
  double t = f - i0;
  if (i0 >= n) {
    i0 = n - 1;
    t = 1.0;
  }
  return {i0, (i0 + 1) % n, t};
}

}  // namespace

InterpolatedValue interpolate_value(const ValueFunction& vf, const State& s) {
  const Grid3& g = vf.grid;
  bool clamped = false;
  const AxisWeight ax = locate_clamped(g, 0, s.x, clamped);
  const AxisWeight ay = locate_clamped(g, 1, s.y, clamped);
  const AxisWeight at = locate_periodic(g, 2, s.theta);

  auto v = [&](int ix, int iy, int it) { return vf.values[g.index(ix, iy, it)]; };
  auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };

  const double c00 = lerp(v(ax.i0, ay.i0, at.i0), v(ax.i0, ay.i0, at.i1), at.t);
  const double c01 = lerp(v(ax.i0, ay.i1, at.i0), v(ax.i0, ay.i1, at.i1), at.t);
  const double c10 = lerp(v(ax.i1, ay.i0, at.i0), v(ax.i1, ay.i0, at.i1), at.t);
  const double c11 = lerp(v(ax.i1, ay.i1, at.i0), v(ax.i1, ay.i1, at.i1), at.t);
  const double c0 = lerp(c00, c01, ay.t);
  const double c1 = lerp(c10, c11, ay.t);
  return {lerp(c0, c1, ax.t), clamped};
}

InterpolatedGradient interpolate_gradient(const ValueFunction& vf, const State& s) {
  const Grid3& g = vf.grid;
  const double hx = g.spacing(0);
  const double hy = g.spacing(1);
  const double ht = g.spacing(2);

  auto sample = [&](double x, double y, double th) {
    // Raw theta so the wrap happens inside interpolate_value, not in State.
    State q;
    q.x = x;
    q.y = y;
    q.theta = th;
    return interpolate_value(vf, q);
  };

  const InterpolatedValue center = sample(s.x, s.y, s.theta);
  const InterpolatedValue xp = sample(s.x + 0.5 * hx, s.y, s.theta);
  const InterpolatedValue xm = sample(s.x - 0.5 * hx, s.y, s.theta);
  const InterpolatedValue yp = sample(s.x, s.y + 0.5 * hy, s.theta);
  const InterpolatedValue ym = sample(s.x, s.y - 0.5 * hy, s.theta);
  const InterpolatedValue tp = sample(s.x, s.y, s.theta + 0.5 * ht);
  const InterpolatedValue tm = sample(s.x, s.y, s.theta - 0.5 * ht);

  InterpolatedGradient out;
  out.gradient.p1 = (xp.value - xm.value) / hx;
  out.gradient.p2 = (yp.value - ym.value) / hy;
  out.gradient.p3 = (tp.value - tm.value) / ht;
  out.out_of_domain = center.out_of_domain;
  return out;
}

bool is_safe(const ValueFunction& vf, const State& s, double level) {
  return interpolate_value(vf, s).value > level;
}

double cell_value_tolerance(const ValueFunction& vf) {
  return std::max(vf.grid.spacing(0), vf.grid.spacing(1));
}

double max_gradient_norm(const ValueFunction& vf) {
  const Grid3& g = vf.grid;
  const int nx = g.dims[0], ny = g.dims[1], nt = g.dims[2];
  const double hx = g.spacing(0), hy = g.spacing(1), ht = g.spacing(2);
  double best = 0.0;
  for (int ix = 0; ix < nx; ++ix) {
    const int xl = std::max(ix - 1, 0), xr = std::min(ix + 1, nx - 1);
    for (int iy = 0; iy < ny; ++iy) {
      const int yl = std::max(iy - 1, 0), yr = std::min(iy + 1, ny - 1);
      for (int it = 0; it < nt; ++it) {
        const int tl = (it + nt - 1) % nt, tr = (it + 1) % nt;
        const double p1 = (vf.at(xr, iy, it) - vf.at(xl, iy, it)) / ((xr - xl) * hx);
        const double p2 = (vf.at(ix, yr, it) - vf.at(ix, yl, it)) / ((yr - yl) * hy);
        const double p3 = (vf.at(ix, iy, tr) - vf.at(ix, iy, tl)) / (2.0 * ht);
        best = std::max(best, std::sqrt(p1 * p1 + p2 * p2 + p3 * p3));
      }
    }
  }
  return best;
}

double grid_epsilon(const ValueFunction& vf) {
  const Grid3& g = vf.grid;
  const double hmax = std::max({g.spacing(0), g.spacing(1), g.spacing(2)});
  return 2.0 * hmax * max_gradient_norm(vf);
}

}  // namespace safekernel
