#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "safekernel/errors.hpp"
#include "safekernel/reachability.hpp"
#include "safekernel/safety_controller.hpp"

using namespace safekernel;
using safekernel::testing::canonical_vf;
using safekernel::testing::field;

namespace {

const DubinsParams kRobot{3.0, 1.0};
constexpr double kDt = 1.0 / 60.0;

std::shared_ptr<const ValueFunction> ramp() {
  // V = x, so V_c is the x offset from the obstacle centre.
  static auto vf = std::make_shared<const ValueFunction>(
      field(Grid3::dubins(15.0, 31, 31, 8), [](double x, double, double) { return x; }));
  return vf;
}

// Minimum composite value over a filtered rollout with a straight nominal law.
double rollout_min(SafetyPolicy policy, State s, std::span<const ObstacleView> obs, double horizon) {
  double lo = std::numeric_limits<double>::infinity();
  const auto steps = static_cast<long>(horizon / kDt);
  for (long k = 0; k <= steps; ++k) {
    lo = std::min(lo, composite_value(*policy.vf, s, obs).value);
    const FilterOutput f = filter_control(policy, s, 0.0, obs, kRobot);
    s = rk4_step(s, f.u, kDt, kRobot);
  }
  return lo;
}

}  // namespace

TEST(Hysteresis, TenPercentPlusOneCell) {
  const auto vf = ramp();
  EXPECT_NEAR(default_hysteresis(*vf, 2.0), 0.2 + cell_value_tolerance(*vf), 1e-15);
  EXPECT_NEAR(default_hysteresis(*vf, -2.0), 0.2 + cell_value_tolerance(*vf), 1e-15);
  EXPECT_NEAR(default_hysteresis(*vf, 0.0), cell_value_tolerance(*vf), 1e-15);
}

TEST(MakePolicy, GuardFollowsLookahead) {
  const auto vf = ramp();
  const SafetyPolicy plain = make_policy(vf, 0.3);
  EXPECT_EQ(plain.lookahead, 0.0);
  EXPECT_EQ(plain.guard_horizon, 0.0);
  EXPECT_FALSE(plain.engaged);
  const SafetyPolicy ahead = make_policy(vf, 0.3, kDt);
  EXPECT_LT(ahead.guard_horizon, 0.0);
  EXPECT_EQ(ahead.guard_band, grid_epsilon(*vf));
  EXPECT_THROW(make_policy(nullptr, 0.0), Error);
}

TEST(CompositeValue, MinimumOverDetectedObstacles) {
  const auto vf = ramp();
  const State s(0, 0, 0);
  const std::vector<ObstacleView> obs{
      {{-3, 0, 1}, 7, true},   // V = 3
      {{-1, 0, 1}, 8, false},  // V = 1, unseen
      {{-2, 0, 1}, 9, true},   // V = 2
  };
  const CompositeValue seen = composite_value(*vf, s, obs);
  EXPECT_DOUBLE_EQ(seen.value, 2.0);
  EXPECT_EQ(seen.argmin, 2);
  const CompositeValue all = composite_value(*vf, s, obs, false);
  EXPECT_DOUBLE_EQ(all.value, 1.0);
  EXPECT_EQ(all.argmin, 1);
  const CompositeValue none = composite_value(*vf, s, std::span<const ObstacleView>{});
  EXPECT_TRUE(std::isinf(none.value));
  EXPECT_EQ(none.argmin, -1);
}

TEST(CompositeValue, TiesKeepTheFirst) {
  const auto vf = ramp();
  const std::vector<ObstacleView> obs{{{-2, 5, 1}, 0, true}, {{-2, -5, 1}, 1, true}};
  EXPECT_EQ(composite_value(*vf, State(0, 0, 0), obs).argmin, 0);
}

TEST(FilterControl, PassesNominalThroughAboveAlpha) {
  SafetyPolicy p = make_policy(ramp(), 0.5);
  const std::vector<ObstacleView> obs{{{-4, 0, 1}, 0, true}};
  const FilterOutput f = filter_control(p, State(0, 0, 0), 0.37, obs, kRobot);
  EXPECT_EQ(f.u, 0.37);
  EXPECT_FALSE(f.override_active);
  EXPECT_DOUBLE_EQ(f.composite, 4.0);
  EXPECT_EQ(f.threat, -1);
}

TEST(FilterControl, ClampsNominal) {
  SafetyPolicy p = make_policy(ramp(), 0.5);
  EXPECT_EQ(filter_control(p, State(0, 0, 0), 7.0, std::span<const ObstacleView>{}, kRobot).u, 1.0);
  EXPECT_EQ(filter_control(p, State(0, 0, 0), -7.0, std::span<const ObstacleView>{}, kRobot).u, -1.0);
}

TEST(FilterControl, LatchWithHysteresis) {
  const auto vf = canonical_vf(1.0);
  SafetyPolicy p = make_policy(vf, 0.5);
  const std::vector<ObstacleView> obs{{{0, 0, 2.25}, 0, true}};
  // Heading straight at the obstacle from the +x side.
  auto state_at = [&](double target) {
    double lo = 2.25, hi = 14.0;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      (composite_value(*vf, State(mid, 0, std::numbers::pi), obs).value < target ? lo : hi) = mid;
    }
    return State(0.5 * (lo + hi), 0, std::numbers::pi);
  };

  const State outside = state_at(0.5 + 0.05);
  EXPECT_FALSE(filter_control(p, outside, 0.0, obs, kRobot).override_active);

  const State at_level = state_at(0.5 - 1e-9);
  const FilterOutput on = filter_control(p, at_level, 0.0, obs, kRobot);
  ASSERT_TRUE(on.override_active);
  EXPECT_EQ(on.threat, 0);
  EXPECT_EQ(std::abs(on.u), 1.0);
  EXPECT_EQ(on.u, optimal_avoid_control(gradient_relative(*vf, at_level, obs[0].disk).gradient, kRobot));

  // Between alpha and the release level the latch holds.
  const State band = state_at(0.5 + 0.5 * p.hysteresis);
  EXPECT_TRUE(filter_control(p, band, 0.0, obs, kRobot).override_active);
  const State released = state_at(p.release_level() + 0.05);
  EXPECT_FALSE(filter_control(p, released, 0.0, obs, kRobot).override_active);
  EXPECT_FALSE(p.engaged);
  EXPECT_FALSE(filter_control(p, band, 0.0, obs, kRobot).override_active);
}

TEST(FilterControl, NothingDetectedReleases) {
  SafetyPolicy p = make_policy(ramp(), 0.5);
  p.engaged = true;
  const std::vector<ObstacleView> obs{{{0, 0, 1}, 0, false}};
  const FilterOutput f = filter_control(p, State(0, 0, 0), 0.2, obs, kRobot);
  EXPECT_FALSE(f.override_active);
  EXPECT_FALSE(p.engaged);
  EXPECT_EQ(f.u, 0.2);
}

TEST(FilterControl, LookaheadCatchesTheNextTick) {
  // Moving in -x at 3 m/s on V = x: one tick drops V by 0.05.
  const std::vector<ObstacleView> obs{{{0, 0, 1}, 0, true}};
  const State s(0.52, 0, std::numbers::pi);
  SafetyPolicy plain = make_policy(ramp(), 0.5);
  EXPECT_FALSE(filter_control(plain, s, 0.0, obs, kRobot).override_active);
  SafetyPolicy ahead = make_policy(ramp(), 0.5, kDt);
  ahead.guard_horizon = 0.0;
  EXPECT_TRUE(filter_control(ahead, s, 0.0, obs, kRobot).override_active);
  ahead.engaged = false;
  EXPECT_FALSE(filter_control(ahead, State(0.56, 0, std::numbers::pi), 0.0, obs, kRobot).override_active);
}

TEST(FilterControl, GuardKeepsTheLevelSet) {
  const auto vf = canonical_vf(0.75);
  const double alpha = 0.3;
  const std::vector<ObstacleView> obs{{{0, 0, 2.25}, 0, true}};
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> dist(8.0, 13.0);
  std::uniform_real_distribution<double> jitter(-0.4, 0.4);
  double worst_guarded = std::numeric_limits<double>::infinity();
  double worst_plain = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 200; ++i) {
    const double b = ang(rng), d = dist(rng);
    const State s(d * std::cos(b), d * std::sin(b), b + std::numbers::pi + jitter(rng));
    SafetyPolicy guarded = make_policy(vf, alpha, kDt);
    SafetyPolicy plain = guarded;
    plain.guard_horizon = 0.0;
    worst_guarded = std::min(worst_guarded, rollout_min(guarded, s, obs, 8.0));
    worst_plain = std::min(worst_plain, rollout_min(plain, s, obs, 8.0));
  }
  EXPECT_GT(worst_guarded, alpha);
  // Without the guard the level set is not held; the sag stays within one grid epsilon.
  EXPECT_LT(worst_plain, alpha);
  EXPECT_GT(worst_plain, alpha - grid_epsilon(*vf));
}

TEST(ClosedLoopSafe, FilterPreventsCollision) {
  const auto vf = canonical_vf(1.0);
  const std::vector<ObstacleView> seen{{{0, 0, 2.25}, 0, true}};
  const std::vector<ObstacleView> unseen{{{0, 0, 2.25}, 0, false}};
  const FeedbackPolicy straight = [](const State&) { return 0.0; };
  const State s0(-10, 0.3, 0);
  EXPECT_TRUE(closed_loop_safe(make_policy(vf, 0.0, kDt), s0, straight, seen, 8.0, kRobot));
  EXPECT_FALSE(closed_loop_safe(make_policy(vf, 0.0, kDt), s0, straight, unseen, 8.0, kRobot));
  EXPECT_TRUE(closed_loop_safe(make_policy(vf, 0.0, kDt), s0, straight, std::span<const ObstacleView>{}, 8.0,
                               kRobot));
}

TEST(ClosedLoopSafe, NonFiniteNominalIsAFault) {
  const auto vf = ramp();
  const std::vector<ObstacleView> obs{{{-5, 0, 1}, 0, true}};
  const FeedbackPolicy bad = [](const State&) { return std::numeric_limits<double>::quiet_NaN(); };
  try {
    closed_loop_safe(make_policy(vf, 0.0), State(0, 0, 0), bad, obs, 1.0, kRobot);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::policy_fault);
  }
}
