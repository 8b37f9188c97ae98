#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "safekernel/session.hpp"

namespace safekernel {

struct ServerConfig {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  SessionConfig session;       // template for every connection
  /// Each session appends its Phase II records to <log_dir>/<session id>.jsonl.
  std::filesystem::path log_dir = ".";
  bool stop_on_signal = false;  // SIGINT / SIGTERM end run()
};

/// WebSocket front end: one Session per connection, JSON text frames both
/// ways, physics at 1 / session.dt with state frames every
/// broadcast_divisor ticks. All sessions share one event-loop thread.
class Server {
 public:
  /// Binds immediately; throws Error(io) if the address is unavailable.
  explicit Server(ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const;
  /// Blocks until stop() is called.
  void run();
  /// Safe to call from any thread.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace safekernel
