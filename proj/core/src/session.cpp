#include "safekernel/session.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "safekernel/errors.hpp"

namespace safekernel {

using nlohmann::json;

const char* to_string(Phase p) {
  switch (p) {
    case Phase::I: return "I";
    case Phase::II: return "II";
    case Phase::III: return "III";
  }
  return "?";
}

Phase phase_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "I") return Phase::I;
    if (s == "II") return Phase::II;
    if (s == "III") return Phase::III;
  } else if (j.is_number_integer()) {
    const int v = j.get<int>();
    if (v >= 1 && v <= 3) return static_cast<Phase>(v);
  }
  throw Error(ErrorKind::protocol, "phase must be I, II, III or 1..3");
}

namespace {

json error_message(const std::string& text) { return {{"type", "error"}, {"message", text}}; }

json event(const char* kind) { return {{"type", "event"}, {"kind", kind}}; }

std::int64_t ticks_for(double seconds, double dt) {
  return static_cast<std::int64_t>(std::llround(seconds / dt));
}

}  // namespace

Session::Session(std::string id, SessionConfig config, RecordSink sink)
    : id_(std::move(id)), config_(std::move(config)), sink_(std::move(sink)), rng_(config_.seed) {
  config_.robot.validate();
  if (!(config_.dt > 0.0)) throw Error(ErrorKind::invalid_argument, "session dt must be positive");
  if (config_.broadcast_divisor < 1) throw Error(ErrorKind::invalid_argument, "broadcast divisor must be >= 1");
}

std::vector<json> Session::handle_text(std::string_view text) {
  json message;
  try {
    message = json::parse(text);
  } catch (const json::parse_error&) {
    return {error_message("malformed JSON")};
  }
  return handle(message);
}

std::vector<json> Session::handle(const json& message) {
  if (!message.is_object() || !message.contains("type") || !message.at("type").is_string()) {
    return {error_message("message needs a string 'type'")};
  }
  const auto type = message.at("type").get<std::string>();
  try {
    if (type == "start_phase") return start_phase(message);
    if (type == "control") return on_control(message);
    if (type == "intervene") return on_intervene();
    if (type == "remove") return on_remove(message);
  } catch (const Error& e) {
    return {error_message(e.what())};
  } catch (const json::exception& e) {
    return {error_message(std::string("bad message: ") + e.what())};
  }
  return {error_message("unknown message type '" + type + "'")};
}

std::vector<json> Session::start_phase(const json& message) {
  const Phase next = phase_from_json(message.at("phase"));
  if (running_) {
    return {error_message(std::string("phase ") + to_string(*phase_) + " is still running")};
  }
  const Phase expected = phase_ ? static_cast<Phase>(static_cast<int>(*phase_) + 1) : config_.entry_phase;
  if (phase_ == Phase::III || next != expected) {
    return {error_message(std::string("cannot start phase ") + to_string(next) + " now")};
  }
  const json params = message.value("params", json::object());
  if (!params.is_object()) return {error_message("params must be an object")};
  if (params.contains("seed")) rng_.seed(params.at("seed").get<std::uint64_t>());

  const std::optional<Phase> previous = phase_;
  phase_ = next;
  running_ = true;
  tick_ = 0;
  control_ = 0.0;
  crashes_ = 0;
  world_.reset();
  pending_removals_.clear();

  switch (next) {
    case Phase::I: {
      phase_ticks_ = params.contains("duration_s") ? ticks_for(params.at("duration_s").get<double>(), config_.dt)
                                                   : config_.phase1_ticks;
      obstacle_ = {config_.arena_width / 2.0, config_.arena_height / 2.0, config_.phase1_obstacle_radius};
      robot_ = State(config_.arena_width / 8.0, config_.arena_height / 2.0, 0.0);
      break;
    }
    case Phase::II: {
      scenes_target_ = params.value("scenes", config_.phase2_scenes);
      if (scenes_target_ < 1) {
        phase_ = previous;
        running_ = false;
        return {error_message("scenes must be >= 1")};
      }
      scenes_done_ = 0;
      begin_scene();
      break;
    }
    case Phase::III: {
      WorldConfig wc = config_.world;
      if (params.contains("seed")) wc.seed = params.at("seed").get<std::uint64_t>();
      if (params.contains("duration_s")) wc.trial_duration = ticks_for(params.at("duration_s").get<double>(), wc.dt);
      try {
        world_ = spawn_world(wc, config_.team);
      } catch (const Error&) {
        phase_ = previous;
        running_ = false;
        throw;
      }
      phase_ticks_ = wc.trial_duration;
      break;
    }
  }
  return {state_frame()};
}

std::vector<json> Session::on_control(const json& message) {
  if (!running_ || phase_ != Phase::I) return {error_message("control is only accepted in phase I")};
  const double u = message.at("u").get<double>();
  if (!std::isfinite(u) || std::abs(u) > config_.robot.omega_max + 1e-9) {
    return {error_message("control outside [-omega_max, omega_max]")};
  }
  control_ = u;
  return {};
}

std::vector<json> Session::on_intervene() {
  if (!running_ || phase_ != Phase::II) return {error_message("intervene is only accepted in phase II")};
  // Later presses in the same scene, or during the pause, are ignored.
  if (!scene_live_) return {};
  InterventionRecord rec = InterventionRecord::from_absolute(robot_, obstacle_, id_, tick_);
  records_.push_back(rec);
  if (sink_) sink_(rec);
  std::vector<json> out;
  end_scene(out, true);
  return out;
}

std::vector<json> Session::on_remove(const json& message) {
  if (!running_ || phase_ != Phase::III) return {error_message("remove is only accepted in phase III")};
  const int id = message.at("obstacle_id").get<int>();
  if (world_->find_obstacle(id) == nullptr) return {error_message("obstacle " + std::to_string(id) + " is not live")};
  if (std::find(pending_removals_.begin(), pending_removals_.end(), id) == pending_removals_.end()) {
    pending_removals_.push_back(id);
  }
  return {};
}

std::vector<json> Session::tick() {
  std::vector<json> out;
  if (!running_) return out;
  switch (*phase_) {
    case Phase::I: tick_phase1(out); break;
    case Phase::II: tick_phase2(out); break;
    case Phase::III: tick_phase3(out); break;
  }
  if (running_ && tick_ % config_.broadcast_divisor == 0) out.push_back(state_frame());
  return out;
}

void Session::tick_phase1(std::vector<json>& out) {
  robot_ = rk4_step(robot_, control_, config_.dt, config_.robot);
  robot_.x = std::clamp(robot_.x, 0.0, config_.arena_width);
  robot_.y = std::clamp(robot_.y, 0.0, config_.arena_height);
  ++tick_;
  if (std::hypot(robot_.x - obstacle_.cx, robot_.y - obstacle_.cy) < obstacle_.r) {
    ++crashes_;
    json e = event("crash");
    e["robot_id"] = 0;
    out.push_back(std::move(e));
    robot_ = State(config_.arena_width / 8.0, config_.arena_height / 2.0, 0.0);
  }
  if (tick_ >= phase_ticks_) finish_phase(out);
}

void Session::begin_scene() {
  const Scene scene = generate_scene(rng_, config_.scene);
  const double cx = config_.arena_width / 2.0;
  const double cy = config_.arena_height / 2.0;
  obstacle_ = {cx, cy, scene.obstacle.r};
  robot_ = State(cx + scene.robot.x, cy + scene.robot.y, scene.robot.theta);
  last_distance_ = std::hypot(scene.robot.x, scene.robot.y);
  scene_live_ = true;
  pause_left_ = 0;
}

void Session::end_scene(std::vector<json>& out, bool intervened) {
  json e = event("scene_end");
  e["scene"] = scenes_done_;
  e["intervened"] = intervened;
  out.push_back(std::move(e));
  ++scenes_done_;
  scene_live_ = false;
  pause_left_ = config_.scene_pause_ticks;
}

void Session::tick_phase2(std::vector<json>& out) {
  ++tick_;
  if (!scene_live_) {
    if (pause_left_ > 0) --pause_left_;
    if (pause_left_ == 0) {
      if (scenes_done_ >= scenes_target_) {
        finish_phase(out);
      } else {
        begin_scene();
      }
    }
    return;
  }
  robot_ = rk4_step(robot_, 0.0, config_.dt, config_.robot);
  const double d = std::hypot(robot_.x - obstacle_.cx, robot_.y - obstacle_.cy);
  if (d < obstacle_.r) {
    json e = event("crash");
    e["robot_id"] = 0;
    out.push_back(std::move(e));
    end_scene(out, false);
  } else if (d > last_distance_) {
    end_scene(out, false);  // passed by
  } else {
    last_distance_ = d;
  }
}

void Session::tick_phase3(std::vector<json>& out) {
  std::optional<int> removal;
  while (!pending_removals_.empty() && !removal) {
    const int id = pending_removals_.front();
    pending_removals_.pop_front();
    if (world_->find_obstacle(id) != nullptr) removal = id;
  }
  step(*world_, removal);
  tick_ = world_->tick;
  for (const WorldEvent& ev : world_->last_events) {
    json e = event(to_string(ev.kind));
    if (ev.robot_id >= 0) e["robot_id"] = ev.robot_id;
    if (ev.obstacle_id >= 0) e["obstacle_id"] = ev.obstacle_id;
    if (ev.classification) e["classification"] = to_string(*ev.classification);
    out.push_back(std::move(e));
  }
  if (tick_ >= phase_ticks_) finish_phase(out);
}

void Session::finish_phase(std::vector<json>& out) {
  running_ = false;
  out.push_back(state_frame());
  json e = event("phase_end");
  e["phase"] = to_string(*phase_);
  if (phase_ == Phase::II) e["records"] = records_.size();
  if (phase_ == Phase::III) {
    const TrialMetrics& m = world_->metrics;
    e["metrics"] = {{"trips", m.trips},
                    {"crashes", m.crashes},
                    {"interventions", m.interventions},
                    {"false_positives", m.false_positives},
                    {"score", m.score}};
  }
  out.push_back(std::move(e));
}

double Session::time_left() const {
  if (!phase_) return 0.0;
  if (phase_ == Phase::II) return 0.0;
  return static_cast<double>(std::max<std::int64_t>(phase_ticks_ - tick_, 0)) * config_.dt;
}

json Session::state_frame() const {
  json robots = json::array();
  json obstacles = json::array();
  std::int64_t score = 0;
  if (world_) {
    for (const Robot& rb : world_->robots) {
      robots.push_back({{"id", rb.id}, {"x", rb.state.x}, {"y", rb.state.y}, {"theta", rb.state.theta}});
    }
    for (const Obstacle& o : world_->obstacles) {
      obstacles.push_back({{"id", o.id}, {"cx", o.disk.cx}, {"cy", o.disk.cy}, {"r", o.disk.r}});
    }
    score = world_->metrics.score;
  } else if (phase_) {
    if (phase_ == Phase::I || scene_live_) {
      robots.push_back({{"id", 0}, {"x", robot_.x}, {"y", robot_.y}, {"theta", robot_.theta}});
    }
    obstacles.push_back({{"id", 0}, {"cx", obstacle_.cx}, {"cy", obstacle_.cy}, {"r", obstacle_.r}});
  }
  json frame = {{"type", "state"},
                {"phase", phase_ ? json(to_string(*phase_)) : json(nullptr)},
                {"tick", tick_},
                {"robots", std::move(robots)},
                {"obstacles", std::move(obstacles)},
                {"score", score},
                {"time_left", time_left()}};
  if (phase_ == Phase::II) {
    frame["scene"] = scenes_done_;
    frame["scenes"] = scenes_target_;
  }
  return frame;
}

}  // namespace safekernel
