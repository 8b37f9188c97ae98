#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "safekernel/dynamics.hpp"
#include "safekernel/learning.hpp"
#include "safekernel/safety_controller.hpp"
#include "safekernel/supervisor.hpp"
#include "safekernel/value_function.hpp"

namespace safekernel {

struct ScoreRules {
  int trip_reward = 1;
  int crash_cost = 10;
  int removal_cost = 5;
};

struct WorldConfig {
  double width = 72.0;
  double height = 44.0;
  int n_robots = 4;
  int n_obstacles = 10;
  double obstacle_radius = 2.25;
  double detection_prob = 0.8;
  ScoreRules score;
  double dt = 1.0 / 60.0;
  std::int64_t trial_duration = 3 * 60 * 60;  // ticks
  std::uint64_t seed = 1;
  DubinsParams robot{3.0, 1.0};
  double heading_gain = 2.0;
  double capture_radius = 1.5;
  double edge_margin = 2.0;       // lane starts and goals sit this far inside the left/right edges
  double obstacle_margin = 8.0;   // obstacle centres keep this far from the left/right edges
  double relevance_radius = -1.0; // <= 0 selects two turning diameters

  double effective_relevance_radius() const;
  /// Minimum gap between obstacle boundaries: one turning diameter.
  double obstacle_clearance() const { return 2.0 * robot.turning_radius(); }
  void validate() const;
};

struct Obstacle {
  int id = 0;
  KeepOutDisk disk;
};

struct Robot {
  int id = 0;
  State state;
  double goal_x = 0.0;
  double goal_y = 0.0;
  double trip_start_x = 0.0;
  double trip_start_y = 0.0;
  bool heading_right = true;
  SafetyPolicy policy;
  std::map<int, bool> detected;  // obstacle id -> robot sees it
  int trips_completed = 0;
  bool override_active = false;
};

enum class Classification { true_positive, false_positive };

const char* to_string(Classification c);

struct InterventionEvent {
  std::int64_t tick = 0;
  int obstacle_id = 0;
  Classification classification = Classification::true_positive;
};

struct TrialMetrics {
  int trips = 0;
  int crashes = 0;
  int interventions = 0;
  int false_positives = 0;
  std::int64_t score = 0;
  std::vector<InterventionEvent> intervention_log;

  std::int64_t expected_score(const ScoreRules& rules) const {
    return static_cast<std::int64_t>(rules.trip_reward) * trips -
           static_cast<std::int64_t>(rules.crash_cost) * crashes -
           static_cast<std::int64_t>(rules.removal_cost) * interventions;
  }
};

enum class WorldEventKind { crash, trip, removal };

const char* to_string(WorldEventKind k);

struct WorldEvent {
  WorldEventKind kind = WorldEventKind::trip;
  int robot_id = -1;     // -1 for removals
  int obstacle_id = -1;  // -1 for trips
  std::optional<Classification> classification;  // removals only
};

/// Safe set the whole team steers by.
struct TeamSafety {
  std::shared_ptr<const ValueFunction> vf;
  double alpha = 0.0;
  double hysteresis = -1.0;  // < 0 selects default_hysteresis
  double lookahead = -1.0;   // < 0 selects one tick
  bool guard = true;         // guard rollout, see SafetyPolicy
};

struct WorldState {
  WorldConfig config;
  std::vector<Robot> robots;
  std::vector<Obstacle> obstacles;  // ascending id
  int next_obstacle_id = 0;
  std::int64_t tick = 0;
  TrialMetrics metrics;
  std::mt19937_64 rng;
  std::vector<WorldEvent> last_events;  // events of the latest step

  const Obstacle* find_obstacle(int id) const;
};

/// Deterministic from config.seed. Robots start on the left edge with goals
/// on the right edge; every robot x obstacle detection flag is a fresh
/// Bernoulli(detection_prob) draw.
WorldState spawn_world(const WorldConfig& config, const TeamSafety& team);

/// Advances one tick. A removal (if any) is applied before the robots move.
void step(WorldState& world, std::optional<int> remove_obstacle);

/// False positive iff every robot near the obstacle had detected it; no
/// nearby robot also counts as a false positive. Call before the removal.
Classification classify_intervention(const WorldState& world, int obstacle_id);

/// A robot is near an obstacle when it is within the relevance radius and
/// either closing on it or within one turning radius of its boundary.
bool is_nearby(const WorldConfig& config, const Robot& robot, const Obstacle& obstacle);

/// Synthetic supervisor for a trial: one noise draw per robot-obstacle
/// approach, an approach lasting while the robot stays within approach_radius
/// of the obstacle.
struct SimulatedSupervisor {
  SupervisorParams params;
  std::uint64_t seed = 1;
  double approach_radius = -1.0;  // <= 0 selects the world's relevance radius
};

/// Per-tick JSONL trace: {tick, robots, obstacles, events}.
void write_trace_line(std::ostream& os, const WorldState& world);

/// Runs config.trial_duration ticks. Without a supervisor nobody removes
/// obstacles.
TrialMetrics run_trial(const WorldConfig& config, const TeamSafety& team,
                       const SimulatedSupervisor* supervisor, std::ostream* trace = nullptr);

/// Trial i runs with world seed base_seed + i and, when a supervisor is
/// given, supervisor seed supervisor->seed + i. Trials run in parallel; the
/// result order is the trial order.
std::vector<TrialMetrics> run_trials(const WorldConfig& config, const TeamSafety& team,
                                     const SimulatedSupervisor* supervisor, int n_trials,
                                     std::uint64_t base_seed);

enum class SafeSetChoice { standard, learned, conservative };
enum class AlphaRule { zero, mu, mu_plus_2sigma };

/// Pre-solved value functions for the three treatments.
struct SafeSetBundle {
  std::shared_ptr<const ValueFunction> standard;
  std::shared_ptr<const ValueFunction> conservative;
  std::shared_ptr<const ValueFunction> learned;
};

/// alpha for the rule: 0, mu_hat, or mu_hat + 2 sigma_hat from the fit.
double resolve_alpha(AlphaRule rule, const SupervisorFit* fit);

TeamSafety make_team_safety(SafeSetChoice choice, const SafeSetBundle& sets, const SupervisorFit* fit,
                            AlphaRule rule);

TrialMetrics run_trial(const WorldConfig& config, SafeSetChoice choice, const SafeSetBundle& sets,
                       const SupervisorFit* fit, AlphaRule rule, const SimulatedSupervisor* supervisor,
                       std::ostream* trace = nullptr);

}  // namespace safekernel
