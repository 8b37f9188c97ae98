#include "safekernel/dynamics.hpp"

#include <cmath>
#include <string>

#include "safekernel/errors.hpp"

namespace safekernel {

namespace {
constexpr double kControlSlack = 1e-9;
}

void DubinsParams::validate() const {
  if (!(speed > 0.0) || !std::isfinite(speed)) {
    throw Error(ErrorKind::invalid_argument, "speed must be positive, got " + std::to_string(speed));
  }
  if (!(omega_max >= 0.0) || !std::isfinite(omega_max)) {
    throw Error(ErrorKind::invalid_argument,
                "omega_max must be non-negative, got " + std::to_string(omega_max));
  }
}

double wrap_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(theta + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  w -= std::numbers::pi;
  // fmod can land exactly on +pi after the shift for inputs just below -pi.
  if (w >= std::numbers::pi) w -= two_pi;
  return w;
}

StateRate flow(const State& s, double u, const DubinsParams& params) {
  if (std::abs(u) > params.omega_max + kControlSlack) {
    throw Error(ErrorKind::control_bound, "control " + std::to_string(u) + " exceeds omega_max " +
                                              std::to_string(params.omega_max));
  }
  return {params.speed * std::cos(s.theta), params.speed * std::sin(s.theta), u};
}

State rk4_step(const State& s, double u, double dt, const DubinsParams& params) {
  if (std::abs(u) > params.omega_max + kControlSlack) {
    throw Error(ErrorKind::control_bound, "control " + std::to_string(u) + " exceeds omega_max " +
                                              std::to_string(params.omega_max));
  }
  // theta is integrated unwrapped inside the step and wrapped once at the end.
  auto f = [&](double th) {
    return StateRate{params.speed * std::cos(th), params.speed * std::sin(th), u};
  };
  const StateRate k1 = f(s.theta);
  const StateRate k2 = f(s.theta + 0.5 * dt * k1.dtheta);
  const StateRate k3 = f(s.theta + 0.5 * dt * k2.dtheta);
  const StateRate k4 = f(s.theta + dt * k3.dtheta);
  return State(s.x + dt / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx),
               s.y + dt / 6.0 * (k1.dy + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy),
               s.theta + dt / 6.0 * (k1.dtheta + 2.0 * k2.dtheta + 2.0 * k3.dtheta + k4.dtheta));
}

Trajectory integrate(const State& s0, const FeedbackPolicy& policy, double dt, double horizon,
                     const DubinsParams& params) {
  params.validate();
  if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "dt must be positive");
  if (!(horizon >= dt)) throw Error(ErrorKind::invalid_argument, "horizon must be at least dt");

  const auto steps = static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
  Trajectory traj;
  traj.reserve(steps + 1);
  State s(s0.x, s0.y, s0.theta);
  traj.push_back({0.0, s});
  for (std::size_t k = 1; k <= steps; ++k) {
    const double u = policy(s);
    if (!std::isfinite(u)) {
      throw Error(ErrorKind::policy_fault,
                  "policy returned a non-finite control at t=" + std::to_string((k - 1) * dt));
    }
    s = rk4_step(s, u, dt, params);
    traj.push_back({static_cast<double>(k) * dt, s});
  }
  return traj;
}

double optimal_avoid_control(const Costate& p, const DubinsParams& params) {
  return p.p3 >= 0.0 ? params.omega_max : -params.omega_max;
}

double hamiltonian(const State& s, const Costate& p, const DubinsParams& params) {
  return params.speed * (p.p1 * std::cos(s.theta) + p.p2 * std::sin(s.theta)) +
         params.omega_max * std::abs(p.p3);
}

}  // namespace safekernel
