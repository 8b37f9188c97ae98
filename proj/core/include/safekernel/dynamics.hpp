#pragma once

#include <functional>
#include <numbers>
#include <vector>

namespace safekernel {

/// Constant-speed Dubins car. Control u is the turn rate, |u| <= omega_max.
struct DubinsParams {
  double speed = 3.0;
  double omega_max = 1.0;

  /// Radius of the tightest circle the car can drive, speed / omega_max.
  double turning_radius() const { return speed / omega_max; }

  /// Throws ErrorKind::invalid_argument unless speed > 0 and omega_max >= 0.
  void validate() const;
};

/// Wraps an angle into [-pi, pi).
double wrap_angle(double theta);

struct State {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // radians, kept in [-pi, pi)

  State() = default;
  State(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}
};

/// Partial derivatives of a value function with respect to (x, y, theta).
struct Costate {
  double p1 = 0.0;
  double p2 = 0.0;
  double p3 = 0.0;
};

struct StateRate {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
};

struct TimedState {
  double t = 0.0;
  State state;
};

using Trajectory = std::vector<TimedState>;
using FeedbackPolicy = std::function<double(const State&)>;

/// Dubins vector field. Rejects controls outside [-omega_max, omega_max].
StateRate flow(const State& s, double u, const DubinsParams& params);

/// One classical RK4 step with u held constant over the step.
State rk4_step(const State& s, double u, double dt, const DubinsParams& params);

/// Fixed-step RK4 rollout under a zero-order-hold feedback policy.
/// Produces floor(horizon / dt) + 1 samples, the first one being s0 at t = 0.
Trajectory integrate(const State& s0, const FeedbackPolicy& policy, double dt, double horizon,
                     const DubinsParams& params);

/// Turn rate maximising dV/dt for costate p: omega_max * sign(p3), with sign(0) = +1.
double optimal_avoid_control(const Costate& p, const DubinsParams& params);

/// max over u of p . f(s, u). The disturbance set is {0}, so the inner
/// minimisation over d drops out; a non-trivial disturbance term would be
/// subtracted here.
double hamiltonian(const State& s, const Costate& p, const DubinsParams& params);

}  // namespace safekernel
