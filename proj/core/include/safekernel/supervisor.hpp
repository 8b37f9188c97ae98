#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "safekernel/dynamics.hpp"
#include "safekernel/value_function.hpp"

namespace safekernel {

/// Noisy idealized supervisor: intervenes when V_S(x) + w <= mu, w ~ N(0, sigma^2).
struct SupervisorParams {
  std::shared_ptr<const ValueFunction> vf;
  double mu = 0.0;
  double sigma = 0.0;

  void validate() const;
};

/// Robot state at the moment a supervisor intervened. relative_state is the
/// absolute state shifted into the obstacle frame; theta is unchanged.
struct InterventionRecord {
  State relative_state;
  KeepOutDisk obstacle;
  State absolute_state;
  std::string session_id;
  std::int64_t tick = 0;

  static InterventionRecord from_absolute(const State& absolute, const KeepOutDisk& obstacle,
                                          std::string session_id, std::int64_t tick);
};

struct Judgement {
  bool intervene = false;
  bool out_of_domain = false;
};

/// `relative` is the robot state in the obstacle frame. Inclusive trigger.
Judgement judge(const SupervisorParams& params, const State& relative, double w);

/// Draws the judgement noise for one approach (0 when sigma == 0).
double draw_noise(const SupervisorParams& params, std::mt19937_64& rng);

struct SceneConfig {
  double obstacle_radius = 2.25;
  double min_distance = 8.0;
  double max_distance = 14.0;
  double heading_jitter = 15.0 * std::numbers::pi / 180.0;  // half-width, radians
};

struct Scene {
  State robot;
  KeepOutDisk obstacle;
};

/// Obstacle at the origin; robot at a uniform bearing and distance, heading
/// at the obstacle centre plus uniform jitter.
Scene generate_scene(std::mt19937_64& rng, const SceneConfig& config);

struct CollectionConfig {
  SceneConfig scene;
  double dt = 1.0 / 60.0;
  double speed = 3.0;
  int max_retries = 10;
  std::string session_id = "synthetic";
};

/// Phase-II style data: per scene, one noise draw, straight (u = 0) rollout
/// at the obstacle, first tick with V_S + w <= mu recorded. Scenes that pass
/// the obstacle or leave the grid without triggering are regenerated.
std::vector<InterventionRecord> collect_interventions(const SupervisorParams& params, int n_scenes,
                                                      std::mt19937_64& rng,
                                                      const CollectionConfig& config = {});

}  // namespace safekernel
