#include "safekernel/reachability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "safekernel/errors.hpp"

namespace safekernel {

ValueFunction signed_distance_payoff(const KeepOutDisk& obstacle, const Grid3& grid) {
  grid.validate();
  if (!(obstacle.r > 0.0)) throw Error(ErrorKind::invalid_argument, "obstacle radius must be positive");

  ValueFunction vf;
  vf.grid = grid;
  vf.obstacle_radius = obstacle.r;
  vf.omega_max = 0.0;
  vf.values.resize(grid.size());
  const int nx = grid.dims[0], ny = grid.dims[1], nt = grid.dims[2];
  for (int ix = 0; ix < nx; ++ix) {
    const double x = grid.coordinate(0, ix) - obstacle.cx;
    for (int iy = 0; iy < ny; ++iy) {
      const double y = grid.coordinate(1, iy) - obstacle.cy;
      const double l = std::hypot(x, y) - obstacle.r;
      std::fill_n(vf.values.begin() + static_cast<std::ptrdiff_t>(grid.index(ix, iy, 0)), nt, l);
    }
  }
  return vf;
}

Grid3 default_grid() { return Grid3::dubins(15.0, 121, 121, 60); }

ValueFunction solve_hji(const ValueFunction& payoff, const DubinsParams& params,
                        const SolverSettings& settings) {
  payoff.validate();
  params.validate();
  if (!(settings.cfl > 0.0) || settings.cfl > 1.0) {
    throw Error(ErrorKind::invalid_argument,
                "CFL factor must lie in (0, 1], got " + std::to_string(settings.cfl));
  }
  if (!(settings.t_max > 0.0)) throw Error(ErrorKind::invalid_argument, "t_max must be positive");

  const Grid3& g = payoff.grid;
  const int nx = g.dims[0], ny = g.dims[1], nt = g.dims[2];
  const double hx = g.spacing(0), hy = g.spacing(1), ht = g.spacing(2);
  const std::size_t sx = static_cast<std::size_t>(ny) * nt;
  const std::size_t sy = static_cast<std::size_t>(nt);

  const std::vector<double>& l = payoff.values;
  const auto [lmin, lmax] = std::minmax_element(l.begin(), l.end());
  const double tol = settings.tol > 0.0 ? settings.tol : 1e-3 * (*lmax - *lmin);

  // Global Lax-Friedrichs coefficients: bounds on |dH/dp_i| over the domain.
  const double ax = params.speed;
  const double ay = params.speed;
  const double at = params.omega_max;
  const double dt = settings.cfl / (ax / hx + ay / hy + at / ht);

  std::vector<double> cos_t(nt), sin_t(nt);
  for (int it = 0; it < nt; ++it) {
    const double th = g.coordinate(2, it);
    cos_t[it] = std::cos(th);
    sin_t[it] = std::sin(th);
  }

  std::vector<double> cur = l;
  std::vector<double> next(cur.size());

  ValueFunction out;
  out.grid = g;
  out.omega_max = params.omega_max;
  out.obstacle_radius = payoff.obstacle_radius;
  out.converged = false;

  double t = 0.0;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  while (t < settings.t_max) {
    double change = 0.0;
#pragma omp parallel for collapse(2) reduction(max : change) schedule(static)
    for (int ix = 0; ix < nx; ++ix) {
      for (int iy = 0; iy < ny; ++iy) {
        const std::size_t row = static_cast<std::size_t>(ix) * sx + static_cast<std::size_t>(iy) * sy;
        const double* v = cur.data() + row;
        const double* lrow = l.data() + row;
        double* vn = next.data() + row;
        // One-sided differences at non-periodic edges: both sides take the
        // interior difference, which also zeroes the dissipation there.
        const double* vxm = ix > 0 ? v - sx : nullptr;
        const double* vxp = ix < nx - 1 ? v + sx : nullptr;
        const double* vym = iy > 0 ? v - sy : nullptr;
        const double* vyp = iy < ny - 1 ? v + sy : nullptr;
        for (int it = 0; it < nt; ++it) {
          const double c = v[it];
          double dxm, dxp, dym, dyp;
          if (vxm && vxp) {
            dxm = (c - vxm[it]) / hx;
            dxp = (vxp[it] - c) / hx;
          } else if (vxp) {
            dxm = dxp = (vxp[it] - c) / hx;
          } else {
            dxm = dxp = (c - vxm[it]) / hx;
          }
          if (vym && vyp) {
            dym = (c - vym[it]) / hy;
            dyp = (vyp[it] - c) / hy;
          } else if (vyp) {
            dym = dyp = (vyp[it] - c) / hy;
          } else {
            dym = dyp = (c - vym[it]) / hy;
          }
          const double tm = v[it == 0 ? nt - 1 : it - 1];
          const double tp = v[it == nt - 1 ? 0 : it + 1];
          const double dtm = (c - tm) / ht;
          const double dtp = (tp - c) / ht;

          const double px = 0.5 * (dxm + dxp);
          const double py = 0.5 * (dym + dyp);
          const double pt = 0.5 * (dtm + dtp);
          const double ham = params.speed * (cos_t[it] * px + sin_t[it] * py) + at * std::abs(pt);
          const double diss = 0.5 * (ax * (dxp - dxm) + ay * (dyp - dym) + at * (dtp - dtm));

          const double updated = std::min(lrow[it], c + dt * (ham + diss));
          vn[it] = updated;
          change = std::max(change, std::abs(updated - c));
        }
      }
    }
    cur.swap(next);
    t += dt;
    ++iterations;
    residual = change / dt;
    if (residual < tol) {
      out.converged = true;
      break;
    }
  }

  out.values = std::move(cur);
  out.residual = residual;
  out.iterations = iterations;
  return out;
}

std::vector<ValueFunction> build_library(std::span<const double> omegas, double obstacle_radius,
                                         const Grid3& grid, const SolverSettings& settings,
                                         double speed) {
  if (omegas.empty()) throw Error(ErrorKind::invalid_argument, "library needs at least one omega");
  for (double w : omegas) {
    if (!(w >= 0.0)) throw Error(ErrorKind::invalid_argument, "library omegas must be non-negative");
  }
  const ValueFunction payoff = signed_distance_payoff({0.0, 0.0, obstacle_radius}, grid);
  std::vector<ValueFunction> library;
  library.reserve(omegas.size());
  for (double w : omegas) {
    library.push_back(solve_hji(payoff, DubinsParams{speed, w}, settings));
    if (!library.back().converged) {
      throw Error(ErrorKind::non_convergence,
                  "library member omega=" + std::to_string(w) + " did not converge by t_max");
    }
  }
  return library;
}

bool is_superset_reachable(const ValueFunction& candidate, const ValueFunction& reference,
                           double margin) {
  if (!(candidate.grid == reference.grid) || candidate.values.size() != reference.values.size()) {
    throw Error(ErrorKind::grid_mismatch, "superset check requires value functions on the same grid");
  }
  if (margin < 0.0) margin = cell_value_tolerance(reference);
  for (std::size_t i = 0; i < reference.values.size(); ++i) {
    if (reference.values[i] <= 0.0 && candidate.values[i] > margin) return false;
  }
  return true;
}

InterpolatedValue evaluate_relative(const ValueFunction& canonical, const State& s,
                                    const KeepOutDisk& obstacle) {
  State rel;
  rel.x = s.x - obstacle.cx;
  rel.y = s.y - obstacle.cy;
  rel.theta = s.theta;
  return interpolate_value(canonical, rel);
}

InterpolatedGradient gradient_relative(const ValueFunction& canonical, const State& s,
                                       const KeepOutDisk& obstacle) {
  State rel;
  rel.x = s.x - obstacle.cx;
  rel.y = s.y - obstacle.cy;
  rel.theta = s.theta;
  return interpolate_gradient(canonical, rel);
}

}  // namespace safekernel
