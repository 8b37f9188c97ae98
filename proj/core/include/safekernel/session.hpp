#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "safekernel/dynamics.hpp"
#include "safekernel/simulation.hpp"
#include "safekernel/supervisor.hpp"

namespace safekernel {

enum class Phase { I = 1, II = 2, III = 3 };

const char* to_string(Phase p);
/// Accepts "I"/"II"/"III" or 1/2/3.
Phase phase_from_json(const nlohmann::json& j);

struct SessionConfig {
  DubinsParams robot{3.0, 1.0};
  double dt = 1.0 / 60.0;
  int broadcast_divisor = 2;  // physics ticks per state frame
  double arena_width = 72.0;
  double arena_height = 44.0;
  Phase entry_phase = Phase::I;
  std::uint64_t seed = 1;

  // Phase I: free drive around one obstacle in the arena centre.
  std::int64_t phase1_ticks = 60 * 60;
  double phase1_obstacle_radius = 2.25;

  // Phase II: straight-line approach scenes, obstacle in the arena centre.
  SceneConfig scene;
  int phase2_scenes = 10;
  int scene_pause_ticks = 30;  // frozen ticks after a scene ends

  // Phase III: the team task.
  WorldConfig world;
  TeamSafety team;
};

/// Receives each Phase II intervention as it is stamped.
using RecordSink = std::function<void(const InterventionRecord&)>;

/// One client's experiment session. Transport-free: the server feeds it
/// parsed client messages and calls tick() at the physics rate; both return
/// the messages to send back. The server tick is the only clock.
class Session {
 public:
  Session(std::string id, SessionConfig config, RecordSink sink = {});

  /// Protocol errors come back as {type:"error"} messages; the session
  /// carries on.
  std::vector<nlohmann::json> handle_text(std::string_view text);
  std::vector<nlohmann::json> handle(const nlohmann::json& message);

  /// Advances the running phase by one tick. Emits events, and a state frame
  /// every broadcast_divisor ticks. No-op while idle.
  std::vector<nlohmann::json> tick();

  nlohmann::json state_frame() const;

  const std::string& id() const { return id_; }
  std::optional<Phase> phase() const { return phase_; }
  bool running() const { return running_; }
  std::int64_t phase_tick() const { return tick_; }
  /// Phase III world, null in other phases.
  const WorldState* world() const { return world_ ? &*world_ : nullptr; }
  const std::vector<InterventionRecord>& records() const { return records_; }
  int scenes_completed() const { return scenes_done_; }

 private:
  std::vector<nlohmann::json> start_phase(const nlohmann::json& message);
  std::vector<nlohmann::json> on_control(const nlohmann::json& message);
  std::vector<nlohmann::json> on_intervene();
  std::vector<nlohmann::json> on_remove(const nlohmann::json& message);

  void tick_phase1(std::vector<nlohmann::json>& out);
  void tick_phase2(std::vector<nlohmann::json>& out);
  void tick_phase3(std::vector<nlohmann::json>& out);
  void begin_scene();
  void end_scene(std::vector<nlohmann::json>& out, bool intervened);
  void finish_phase(std::vector<nlohmann::json>& out);
  double time_left() const;

  std::string id_;
  SessionConfig config_;
  RecordSink sink_;
  std::mt19937_64 rng_;

  std::optional<Phase> phase_;
  bool running_ = false;
  std::int64_t tick_ = 0;
  std::int64_t phase_ticks_ = 0;  // phase I / III length

  // Phases I and II
  State robot_;
  KeepOutDisk obstacle_;
  double control_ = 0.0;
  int crashes_ = 0;

  // Phase II
  int scenes_target_ = 0;
  int scenes_done_ = 0;
  bool scene_live_ = false;
  int pause_left_ = 0;
  double last_distance_ = 0.0;
  std::vector<InterventionRecord> records_;

  // Phase III
  std::optional<WorldState> world_;
  std::deque<int> pending_removals_;
};

}  // namespace safekernel
