#include "safekernel/supervisor.hpp"

#include <cmath>
#include <utility>

#include "safekernel/errors.hpp"

namespace safekernel {

void SupervisorParams::validate() const {
  if (!vf) throw Error(ErrorKind::invalid_argument, "supervisor needs a value function");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorKind::invalid_argument, "supervisor sigma must be non-negative");
  }
  if (!(mu >= 0.0) || !std::isfinite(mu)) {
    throw Error(ErrorKind::invalid_argument, "supervisor mu must be non-negative");
  }
}

InterventionRecord InterventionRecord::from_absolute(const State& absolute, const KeepOutDisk& obstacle,
                                                     std::string session_id, std::int64_t tick) {
  InterventionRecord rec;
  rec.absolute_state = absolute;
  rec.obstacle = obstacle;
  rec.relative_state = State(absolute.x - obstacle.cx, absolute.y - obstacle.cy, absolute.theta);
  rec.session_id = std::move(session_id);
  rec.tick = tick;
  return rec;
}

Judgement judge(const SupervisorParams& params, const State& relative, double w) {
  if (!std::isfinite(w)) throw Error(ErrorKind::invalid_argument, "judgement noise must be finite");
  const InterpolatedValue v = interpolate_value(*params.vf, relative);
  return {v.value + w <= params.mu, v.out_of_domain};
}

double draw_noise(const SupervisorParams& params, std::mt19937_64& rng) {
  if (params.sigma == 0.0) return 0.0;
  std::normal_distribution<double> noise(0.0, params.sigma);
  return noise(rng);
}

Scene generate_scene(std::mt19937_64& rng, const SceneConfig& config) {
  if (!(config.min_distance > 0.0) || config.max_distance < config.min_distance) {
    throw Error(ErrorKind::invalid_argument, "scene distance range must satisfy 0 < min <= max");
  }
  if (!(config.heading_jitter >= 0.0)) {
    throw Error(ErrorKind::invalid_argument, "heading jitter must be non-negative");
  }
  std::uniform_real_distribution<double> bearing_dist(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> distance_dist(config.min_distance, config.max_distance);
  std::uniform_real_distribution<double> jitter_dist(-config.heading_jitter, config.heading_jitter);

  const double bearing = bearing_dist(rng);
  const double distance = config.min_distance == config.max_distance ? config.min_distance
                                                                      : distance_dist(rng);
  const double jitter = config.heading_jitter == 0.0 ? 0.0 : jitter_dist(rng);

  Scene scene;
  scene.obstacle = {0.0, 0.0, config.obstacle_radius};
  scene.robot = State(distance * std::cos(bearing), distance * std::sin(bearing),
                      bearing + std::numbers::pi + jitter);
  return scene;
}

namespace {

// Rolls one scene straight at the obstacle. Returns true and fills `out` on
// the first triggered tick; false if the robot passed or left the grid.
bool run_scene(const SupervisorParams& params, const Scene& scene, double w,
               const CollectionConfig& config, InterventionRecord& out) {
  const DubinsParams dyn{config.speed, 0.0};
  const Grid3& grid = params.vf->grid;
  State s = scene.robot;
  // Time of closest approach for the straight-line path.
  const double vx = std::cos(s.theta), vy = std::sin(s.theta);
  const double t_closest = std::max(0.0, -((s.x - scene.obstacle.cx) * vx + (s.y - scene.obstacle.cy) * vy) /
                                             config.speed);
  // Past closest approach the avoid value only grows; one extra cell of travel
  // covers interpolation wiggle.
  const double t_end = t_closest + std::max(grid.spacing(0), grid.spacing(1)) / config.speed;
  const auto max_ticks = static_cast<std::int64_t>(std::ceil(t_end / config.dt)) + 1;

  for (std::int64_t tick = 0; tick <= max_ticks; ++tick) {
    const State rel(s.x - scene.obstacle.cx, s.y - scene.obstacle.cy, s.theta);
    if (!grid.contains_xy(rel.x, rel.y)) return false;
    if (judge(params, rel, w).intervene) {
      out = InterventionRecord::from_absolute(s, scene.obstacle, config.session_id, tick);
      return true;
    }
    s = rk4_step(s, 0.0, config.dt, dyn);
  }
  return false;
}

}  // namespace

std::vector<InterventionRecord> collect_interventions(const SupervisorParams& params, int n_scenes,
                                                      std::mt19937_64& rng,
                                                      const CollectionConfig& config) {
  params.validate();
  if (n_scenes < 1) throw Error(ErrorKind::invalid_argument, "n_scenes must be at least 1");
  if (!(config.dt > 0.0)) throw Error(ErrorKind::invalid_argument, "dt must be positive");

  std::vector<InterventionRecord> records;
  records.reserve(static_cast<std::size_t>(n_scenes));
  for (int i = 0; i < n_scenes; ++i) {
    bool recorded = false;
    for (int attempt = 0; attempt <= config.max_retries && !recorded; ++attempt) {
      const Scene scene = generate_scene(rng, config.scene);
      const double w = draw_noise(params, rng);
      InterventionRecord rec;
      if (run_scene(params, scene, w, config, rec)) {
        records.push_back(std::move(rec));
        recorded = true;
      }
    }
    if (!recorded) {
      throw Error(ErrorKind::scene_generation,
                  "scene " + std::to_string(i) + " never triggered an intervention after " +
                      std::to_string(config.max_retries) + " retries");
    }
  }
  return records;
}

}  // namespace safekernel
