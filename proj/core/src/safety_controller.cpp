#include "safekernel/safety_controller.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "safekernel/errors.hpp"
#include "safekernel/reachability.hpp"

namespace safekernel {

double default_hysteresis(const ValueFunction& vf, double alpha) {
  return 0.1 * std::abs(alpha) + cell_value_tolerance(vf);
}

SafetyPolicy make_policy(std::shared_ptr<const ValueFunction> vf, double alpha, double lookahead) {
  if (!vf) throw Error(ErrorKind::invalid_argument, "safety policy needs a value function");
  SafetyPolicy p;
  p.hysteresis = default_hysteresis(*vf, alpha);
  p.vf = std::move(vf);
  p.alpha = alpha;
  p.lookahead = lookahead;
  if (lookahead > 0.0) {
    p.guard_horizon = -1.0;
    p.guard_band = grid_epsilon(*p.vf);
  }
  return p;
}

CompositeValue composite_value(const ValueFunction& vf, const State& s,
                               std::span<const ObstacleView> obstacles, bool detected_only) {
  CompositeValue out;
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    if (detected_only && !obstacles[i].detected) continue;
    const double v = evaluate_relative(vf, s, obstacles[i].disk).value;
    // Strict < keeps the earliest obstacle on ties; callers order by id.
    if (v < out.value) {
      out.value = v;
      out.argmin = static_cast<int>(i);
    }
  }
  return out;
}

namespace {

// True iff the engaged law, started at s, keeps V_c above alpha for the
// guard horizon or until V_c leaves the guard band.
bool guard_rollout_clear(const SafetyPolicy& policy, State s, std::span<const ObstacleView> obstacles,
                         const DubinsParams& params) {
  const double horizon = policy.guard_horizon < 0.0 ? std::numbers::pi / params.omega_max : policy.guard_horizon;
  const auto steps = static_cast<long>(std::ceil(horizon / policy.lookahead));
  const double ceiling = policy.alpha + policy.guard_band;
  for (long k = 0; k <= steps; ++k) {
    const CompositeValue c = composite_value(*policy.vf, s, obstacles);
    if (c.value <= policy.alpha) return false;
    if (c.value > ceiling || k == steps) break;
    const Costate p = gradient_relative(*policy.vf, s, obstacles[c.argmin].disk).gradient;
    s = rk4_step(s, optimal_avoid_control(p, params), policy.lookahead, params);
  }
  return true;
}

}  // namespace

FilterOutput filter_control(SafetyPolicy& policy, const State& s, double nominal_u,
                            std::span<const ObstacleView> obstacles, const DubinsParams& params) {
  const double nominal = std::clamp(nominal_u, -params.omega_max, params.omega_max);
  FilterOutput out;
  out.u = nominal;

  const CompositeValue now = composite_value(*policy.vf, s, obstacles);
  out.composite = now.value;
  if (now.argmin < 0) {
    policy.engaged = false;
    return out;
  }

  int threat = now.argmin;
  if (policy.engaged) {
    if (now.value > policy.release_level()) policy.engaged = false;
  } else if (now.value <= policy.alpha) {
    policy.engaged = true;
  } else if (policy.lookahead > 0.0) {
    const State ahead = rk4_step(s, nominal, policy.lookahead, params);
    const CompositeValue next = composite_value(*policy.vf, ahead, obstacles);
    if (next.value <= policy.alpha) {
      policy.engaged = true;
      threat = next.argmin;
    } else if (policy.guard_horizon != 0.0 && next.value <= policy.alpha + policy.guard_band &&
               !guard_rollout_clear(policy, ahead, obstacles, params)) {
      policy.engaged = true;
    }
  }

  if (policy.engaged) {
    const Costate p = gradient_relative(*policy.vf, s, obstacles[threat].disk).gradient;
    out.u = optimal_avoid_control(p, params);
    out.override_active = true;
    out.threat = threat;
  }
  return out;
}

bool closed_loop_safe(SafetyPolicy policy, const State& s0, const FeedbackPolicy& nominal,
                      std::span<const ObstacleView> obstacles, double horizon,
                      const DubinsParams& params, double dt) {
  if (!policy.vf) throw Error(ErrorKind::invalid_argument, "safety policy needs a value function");
  if (obstacles.empty()) return true;
  const double floor = policy.alpha - grid_epsilon(*policy.vf);
  const auto steps = static_cast<long>(std::floor(horizon / dt + 1e-9));
  State s = s0;
  for (long k = 0; k <= steps; ++k) {
    if (composite_value(*policy.vf, s, obstacles, false).value <= floor) return false;
    if (k == steps) break;
    const double u_nom = nominal(s);
    if (!std::isfinite(u_nom)) throw Error(ErrorKind::policy_fault, "nominal policy returned non-finite control");
    const FilterOutput f = filter_control(policy, s, u_nom, obstacles, params);
    s = rk4_step(s, f.u, dt, params);
  }
  return true;
}

}  // namespace safekernel
