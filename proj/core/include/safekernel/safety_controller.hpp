#pragma once

#include <limits>
#include <memory>
#include <span>

#include "safekernel/dynamics.hpp"
#include "safekernel/value_function.hpp"

namespace safekernel {

/// Minimally invasive override on the level set `alpha` of a canonical
/// (origin-centred) value function. One instance per robot: `engaged` is
/// the robot's latch.
struct SafetyPolicy {
  std::shared_ptr<const ValueFunction> vf;
  double alpha = 0.0;
  double hysteresis = 0.0;  // release once V_c > alpha + hysteresis
  /// Prediction window for activation. With lookahead > 0 the filter also
  /// engages when one nominal step of this length would end at or below
  /// alpha; this keeps a discrete-time robot from overshooting the level set
  /// by a tick.
  double lookahead = 0.0;
  /// Guard rollout, used only with lookahead > 0. When the nominal step
  /// ends within guard_band of alpha, the engaged law is rolled out from
  /// there for guard_horizon seconds; the filter engages now if that rollout
  /// would touch alpha. The numerical value function is not exactly
  /// invariant under the bang-bang law, so this keeps V_c > alpha where the
  /// plain activation rule lets it sag below. 0 disables, < 0 selects half
  /// a turn (pi / omega_max).
  double guard_horizon = 0.0;
  double guard_band = 0.0;
  bool engaged = false;

  double release_level() const { return alpha + hysteresis; }
};

/// 10% of |alpha| plus one grid cell of value.
double default_hysteresis(const ValueFunction& vf, double alpha);

/// Default hysteresis; with lookahead > 0 the guard rollout is enabled with
/// a half-turn horizon and a band of grid_epsilon(vf).
SafetyPolicy make_policy(std::shared_ptr<const ValueFunction> vf, double alpha, double lookahead = 0.0);

struct ObstacleView {
  KeepOutDisk disk;
  int id = 0;
  bool detected = true;
};

/// min over detected obstacles of the canonical value in each obstacle's
/// frame; +infinity when nothing is detected.
struct CompositeValue {
  double value = std::numeric_limits<double>::infinity();
  int argmin = -1;  // index into the obstacle span
};

CompositeValue composite_value(const ValueFunction& vf, const State& s,
                               std::span<const ObstacleView> obstacles, bool detected_only = true);

struct FilterOutput {
  double u = 0.0;
  bool override_active = false;
  double composite = std::numeric_limits<double>::infinity();
  int threat = -1;  // index of the obstacle being avoided, -1 if none
};

/// Passes nominal_u through until the composite value reaches alpha, then
/// applies the optimal avoidance turn for the most threatening obstacle
/// until the value clears alpha + hysteresis.
FilterOutput filter_control(SafetyPolicy& policy, const State& s, double nominal_u,
                            std::span<const ObstacleView> obstacles, const DubinsParams& params);

/// Closed-loop rollout of filter_control at step dt. The verdict uses every
/// obstacle, detected or not; the filter only sees detected ones. True iff
/// the composite value stays above alpha - grid_epsilon(vf) throughout.
bool closed_loop_safe(SafetyPolicy policy, const State& s0, const FeedbackPolicy& nominal,
                      std::span<const ObstacleView> obstacles, double horizon,
                      const DubinsParams& params, double dt = 1.0 / 60.0);

}  // namespace safekernel
