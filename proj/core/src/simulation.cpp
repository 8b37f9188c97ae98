#include "safekernel/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "safekernel/errors.hpp"
#include "safekernel/reachability.hpp"

namespace safekernel {

const char* to_string(Classification c) {
  return c == Classification::false_positive ? "false_positive" : "true_positive";
}

const char* to_string(WorldEventKind k) {
  switch (k) {
    case WorldEventKind::crash: return "crash";
    case WorldEventKind::trip: return "trip";
    case WorldEventKind::removal: return "removal";
  }
  return "unknown";
}

double WorldConfig::effective_relevance_radius() const {
  return relevance_radius > 0.0 ? relevance_radius : 4.0 * robot.turning_radius();
}

void WorldConfig::validate() const {
  robot.validate();
  if (!(robot.omega_max > 0.0)) throw Error(ErrorKind::invalid_argument, "robots need omega_max > 0");
  if (!(width > 0.0) || !(height > 0.0)) throw Error(ErrorKind::invalid_argument, "arena must have positive size");
  if (n_robots < 1) throw Error(ErrorKind::invalid_argument, "need at least one robot");
  if (n_obstacles < 0) throw Error(ErrorKind::invalid_argument, "obstacle count must be non-negative");
  if (!(obstacle_radius > 0.0)) throw Error(ErrorKind::invalid_argument, "obstacle radius must be positive");
  if (!(detection_prob >= 0.0 && detection_prob <= 1.0)) {
    throw Error(ErrorKind::invalid_argument, "detection_prob must lie in [0, 1]");
  }
  if (score.crash_cost != 2 * score.removal_cost) {
    throw Error(ErrorKind::invalid_argument, "a removal must cost half of a crash");
  }
  if (!(dt > 0.0)) throw Error(ErrorKind::invalid_argument, "dt must be positive");
  if (trial_duration < 0) throw Error(ErrorKind::invalid_argument, "trial duration must be non-negative");
  if (width <= 2.0 * obstacle_margin) {
    throw Error(ErrorKind::arena_too_crowded, "arena narrower than the obstacle-free edge bands");
  }
}

const Obstacle* WorldState::find_obstacle(int id) const {
  auto it = std::lower_bound(obstacles.begin(), obstacles.end(), id,
                             [](const Obstacle& o, int v) { return o.id < v; });
  return it != obstacles.end() && it->id == id ? &*it : nullptr;
}

namespace {

constexpr int kPlacementAttempts = 1000;

bool bernoulli(std::mt19937_64& rng, double p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < p;
}

double lane_y(const WorldConfig& c, int lane) { return c.height * (lane + 0.5) / c.n_robots; }

double random_goal_y(WorldState& w) {
  const WorldConfig& c = w.config;
  std::uniform_real_distribution<double> gy(c.edge_margin, c.height - c.edge_margin);
  return gy(w.rng);
}

// Rejection-samples a centre keeping the clearance to other obstacles and,
// when requested, to every robot.
KeepOutDisk place_obstacle(WorldState& w, bool keep_off_robots) {
  const WorldConfig& c = w.config;
  const double r = c.obstacle_radius;
  const double min_center_gap = 2.0 * r + c.obstacle_clearance();
  const double robot_gap = r + c.obstacle_clearance();
  std::uniform_real_distribution<double> xs(c.obstacle_margin, c.width - c.obstacle_margin);
  std::uniform_real_distribution<double> ys(r, c.height - r);
  for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
    const KeepOutDisk d{xs(w.rng), ys(w.rng), r};
    bool ok = true;
    for (const Obstacle& o : w.obstacles) {
      if (std::hypot(o.disk.cx - d.cx, o.disk.cy - d.cy) < min_center_gap) {
        ok = false;
        break;
      }
    }
    if (ok && keep_off_robots) {
      for (const Robot& rb : w.robots) {
        if (std::hypot(rb.state.x - d.cx, rb.state.y - d.cy) < robot_gap) {
          ok = false;
          break;
        }
      }
    }
    if (ok) return d;
  }
  throw Error(ErrorKind::arena_too_crowded,
              "could not place an obstacle after " + std::to_string(kPlacementAttempts) + " samples");
}

void add_obstacle(WorldState& w, bool keep_off_robots) {
  const KeepOutDisk d = place_obstacle(w, keep_off_robots);
  const int id = w.next_obstacle_id++;
  w.obstacles.push_back({id, d});
  for (Robot& rb : w.robots) rb.detected[id] = bernoulli(w.rng, w.config.detection_prob);
}

void reroll_detection(WorldState& w, Robot& rb) {
  for (auto& [id, flag] : rb.detected) flag = bernoulli(w.rng, w.config.detection_prob);
}

double nominal_control(const WorldConfig& c, const Robot& rb) {
  const double bearing = std::atan2(rb.goal_y - rb.state.y, rb.goal_x - rb.state.x);
  const double err = wrap_angle(bearing - rb.state.theta);
  return std::clamp(c.heading_gain * err, -c.robot.omega_max, c.robot.omega_max);
}

}  // namespace

WorldState spawn_world(const WorldConfig& config, const TeamSafety& team) {
  config.validate();
  if (!team.vf) throw Error(ErrorKind::invalid_argument, "team safety needs a value function");

  WorldState w;
  w.config = config;
  w.rng.seed(config.seed);

  const double hysteresis = team.hysteresis >= 0.0 ? team.hysteresis : default_hysteresis(*team.vf, team.alpha);
  const double lookahead = team.lookahead >= 0.0 ? team.lookahead : config.dt;
  const bool guard = team.guard && lookahead > 0.0;
  const double guard_band = guard ? grid_epsilon(*team.vf) : 0.0;
  for (int i = 0; i < config.n_robots; ++i) {
    Robot rb;
    rb.id = i;
    rb.trip_start_x = config.edge_margin;
    rb.trip_start_y = lane_y(config, i);
    rb.state = State(rb.trip_start_x, rb.trip_start_y, 0.0);
    rb.heading_right = true;
    rb.goal_x = config.width - config.edge_margin;
    rb.goal_y = random_goal_y(w);
    rb.policy.vf = team.vf;
    rb.policy.alpha = team.alpha;
    rb.policy.hysteresis = hysteresis;
    rb.policy.lookahead = lookahead;
    rb.policy.guard_horizon = guard ? -1.0 : 0.0;
    rb.policy.guard_band = guard_band;
    w.robots.push_back(std::move(rb));
  }
  for (int k = 0; k < config.n_obstacles; ++k) add_obstacle(w, true);
  return w;
}

bool is_nearby(const WorldConfig& config, const Robot& robot, const Obstacle& obstacle) {
  const double dx = obstacle.disk.cx - robot.state.x;
  const double dy = obstacle.disk.cy - robot.state.y;
  const double dist = std::hypot(dx, dy);
  if (dist > config.effective_relevance_radius()) return false;
  const bool closing = dx * std::cos(robot.state.theta) + dy * std::sin(robot.state.theta) > 0.0;
  return closing || dist - obstacle.disk.r <= config.robot.turning_radius();
}

Classification classify_intervention(const WorldState& world, int obstacle_id) {
  const Obstacle* obs = world.find_obstacle(obstacle_id);
  if (obs == nullptr) {
    throw Error(ErrorKind::invalid_argument, "obstacle " + std::to_string(obstacle_id) + " is not live");
  }
  for (const Robot& rb : world.robots) {
    if (!is_nearby(world.config, rb, *obs)) continue;
    if (!rb.detected.at(obstacle_id)) return Classification::true_positive;
  }
  return Classification::false_positive;
}

void step(WorldState& w, std::optional<int> remove_obstacle) {
  const WorldConfig& c = w.config;
  w.last_events.clear();

  if (remove_obstacle) {
    const int id = *remove_obstacle;
    const Classification cls = classify_intervention(w, id);
    w.metrics.interventions += 1;
    if (cls == Classification::false_positive) w.metrics.false_positives += 1;
    w.metrics.score -= c.score.removal_cost;
    w.metrics.intervention_log.push_back({w.tick, id, cls});
    w.last_events.push_back({WorldEventKind::removal, -1, id, cls});

    std::erase_if(w.obstacles, [id](const Obstacle& o) { return o.id == id; });
    for (Robot& rb : w.robots) rb.detected.erase(id);
    add_obstacle(w, true);
  }

  std::vector<ObstacleView> views(w.obstacles.size());
  for (Robot& rb : w.robots) {
    for (std::size_t i = 0; i < w.obstacles.size(); ++i) {
      views[i] = {w.obstacles[i].disk, w.obstacles[i].id, rb.detected.at(w.obstacles[i].id)};
    }
    const double u_nom = nominal_control(c, rb);
    const FilterOutput f = filter_control(rb.policy, rb.state, u_nom, views, c.robot);
    rb.override_active = f.override_active;
    rb.state = rk4_step(rb.state, f.u, c.dt, c.robot);
  }

  for (Robot& rb : w.robots) {
    int hit = -1;
    for (const Obstacle& o : w.obstacles) {
      if (std::hypot(rb.state.x - o.disk.cx, rb.state.y - o.disk.cy) < o.disk.r) {
        hit = o.id;
        break;
      }
    }
    if (hit >= 0) {
      w.metrics.crashes += 1;
      w.metrics.score -= c.score.crash_cost;
      w.last_events.push_back({WorldEventKind::crash, rb.id, hit, std::nullopt});
      rb.state = State(rb.trip_start_x, rb.trip_start_y,
                       std::atan2(rb.goal_y - rb.trip_start_y, rb.goal_x - rb.trip_start_x));
      rb.policy.engaged = false;
      rb.override_active = false;
      reroll_detection(w, rb);
      continue;
    }
    if (std::hypot(rb.state.x - rb.goal_x, rb.state.y - rb.goal_y) <= c.capture_radius) {
      rb.trips_completed += 1;
      w.metrics.trips += 1;
      w.metrics.score += c.score.trip_reward;
      w.last_events.push_back({WorldEventKind::trip, rb.id, -1, std::nullopt});
      rb.trip_start_x = rb.state.x;
      rb.trip_start_y = rb.state.y;
      rb.heading_right = !rb.heading_right;
      rb.goal_x = rb.heading_right ? c.width - c.edge_margin : c.edge_margin;
      rb.goal_y = random_goal_y(w);
    }
  }

  w.tick += 1;
}

void write_trace_line(std::ostream& os, const WorldState& world) {
  nlohmann::json j;
  j["tick"] = world.tick;
  nlohmann::json robots = nlohmann::json::array();
  for (const Robot& rb : world.robots) {
    robots.push_back({{"id", rb.id},
                      {"x", rb.state.x},
                      {"y", rb.state.y},
                      {"theta", rb.state.theta},
                      {"override", rb.override_active}});
  }
  nlohmann::json obstacles = nlohmann::json::array();
  for (const Obstacle& o : world.obstacles) {
    obstacles.push_back({{"id", o.id}, {"cx", o.disk.cx}, {"cy", o.disk.cy}, {"r", o.disk.r}});
  }
  nlohmann::json events = nlohmann::json::array();
  for (const WorldEvent& e : world.last_events) {
    nlohmann::json ev{{"kind", to_string(e.kind)}};
    if (e.robot_id >= 0) ev["robot_id"] = e.robot_id;
    if (e.obstacle_id >= 0) ev["obstacle_id"] = e.obstacle_id;
    if (e.classification) ev["classification"] = to_string(*e.classification);
    events.push_back(std::move(ev));
  }
  j["robots"] = std::move(robots);
  j["obstacles"] = std::move(obstacles);
  j["events"] = std::move(events);
  os << j.dump() << '\n';
}

TrialMetrics run_trial(const WorldConfig& config, const TeamSafety& team,
                       const SimulatedSupervisor* supervisor, std::ostream* trace) {
  WorldState world = spawn_world(config, team);

  std::mt19937_64 noise_rng;
  double approach_radius = config.effective_relevance_radius();
  if (supervisor != nullptr) {
    supervisor->params.validate();
    noise_rng.seed(supervisor->seed);
    if (supervisor->approach_radius > 0.0) approach_radius = supervisor->approach_radius;
  }
  // (robot id, obstacle id) -> noise drawn when the approach began
  std::map<std::pair<int, int>, double> approaches;

  while (world.tick < config.trial_duration) {
    std::optional<int> removal;
    if (supervisor != nullptr) {
      for (const Robot& rb : world.robots) {
        for (const Obstacle& o : world.obstacles) {
          const auto key = std::make_pair(rb.id, o.id);
          const double dist = std::hypot(rb.state.x - o.disk.cx, rb.state.y - o.disk.cy);
          if (dist > approach_radius) {
            approaches.erase(key);
            continue;
          }
          auto it = approaches.find(key);
          if (it == approaches.end()) {
            it = approaches.emplace(key, draw_noise(supervisor->params, noise_rng)).first;
          }
          if (removal) continue;
          const State rel(rb.state.x - o.disk.cx, rb.state.y - o.disk.cy, rb.state.theta);
          if (judge(supervisor->params, rel, it->second).intervene) removal = o.id;
        }
      }
    }

    step(world, removal);

    for (const WorldEvent& e : world.last_events) {
      if (e.kind == WorldEventKind::removal) {
        std::erase_if(approaches, [&](const auto& kv) { return kv.first.second == e.obstacle_id; });
      } else if (e.kind == WorldEventKind::crash) {
        std::erase_if(approaches, [&](const auto& kv) { return kv.first.first == e.robot_id; });
      }
    }
    if (trace != nullptr) write_trace_line(*trace, world);
  }
  return world.metrics;
}

std::vector<TrialMetrics> run_trials(const WorldConfig& config, const TeamSafety& team,
                                     const SimulatedSupervisor* supervisor, int n_trials,
                                     std::uint64_t base_seed) {
  if (n_trials < 0) throw Error(ErrorKind::invalid_argument, "trial count must be non-negative");
  config.validate();
  std::vector<TrialMetrics> out(static_cast<std::size_t>(n_trials));
  std::vector<std::exception_ptr> errors(out.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_trials; ++i) {
    try {
      WorldConfig c = config;
      c.seed = base_seed + static_cast<std::uint64_t>(i);
      if (supervisor != nullptr) {
        SimulatedSupervisor sup = *supervisor;
        sup.seed = supervisor->seed + static_cast<std::uint64_t>(i);
        out[i] = run_trial(c, team, &sup);
      } else {
        out[i] = run_trial(c, team, nullptr);
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

double resolve_alpha(AlphaRule rule, const SupervisorFit* fit) {
  if (rule == AlphaRule::zero) return 0.0;
  if (fit == nullptr) throw Error(ErrorKind::invalid_argument, "alpha rule needs a supervisor fit");
  if (rule == AlphaRule::mu) return fit->mu_hat;
  return fit->mu_hat + 2.0 * std::sqrt(fit->sigma2_hat);
}

TeamSafety make_team_safety(SafeSetChoice choice, const SafeSetBundle& sets, const SupervisorFit* fit,
                            AlphaRule rule) {
  TeamSafety team;
  switch (choice) {
    case SafeSetChoice::standard: team.vf = sets.standard; break;
    case SafeSetChoice::conservative: team.vf = sets.conservative; break;
    case SafeSetChoice::learned: team.vf = sets.learned; break;
  }
  if (!team.vf) throw Error(ErrorKind::invalid_argument, "value function for the chosen safe set is missing");
  team.alpha = resolve_alpha(rule, fit);
  return team;
}

TrialMetrics run_trial(const WorldConfig& config, SafeSetChoice choice, const SafeSetBundle& sets,
                       const SupervisorFit* fit, AlphaRule rule, const SimulatedSupervisor* supervisor,
                       std::ostream* trace) {
  return run_trial(config, make_team_safety(choice, sets, fit, rule), supervisor, trace);
}

}  // namespace safekernel
