#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mpgrasp/run_log.h"
#include "mpgrasp/runtime.h"

namespace mpgrasp {

/// Protocol state machine behind the service endpoint, without sockets.
/// Messages are JSON objects; see docs/protocol.md.
class ServiceCore {
 public:
  ServiceCore(Config config, std::uint64_t seed);

  /// Handles one client message. Returns replies for the sender only
  /// (errors); state changes surface through drain_events().
  std::vector<Json> handle(const std::string& text);

  /// Advances simulated time unless paused.
  void advance(double seconds);

  Json scene_state() const;
  /// Event messages logged since the previous call.
  std::vector<Json> drain_events();

  bool paused() const { return paused_; }
  const Runtime& runtime() const { return *runtime_; }

 private:
  void reset();

  Config config_;
  std::uint64_t seed_;
  std::unique_ptr<Runtime> runtime_;
  std::size_t drained_ = 0;
  bool paused_ = false;
  std::vector<Json> pending_;
};

struct ServiceOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  double state_rate = 10.0;    // scene_state broadcasts per second
  double step_period = 0.01;   // s of simulated time per timer tick
  std::uint64_t seed = 0;
};

/// WebSocket server, one JSON message per frame, single io thread.
class Service {
 public:
  Service(Config config, ServiceOptions options);
  ~Service();

  /// Binds and listens; returns the bound port.
  unsigned short open();
  /// Serves until stop() is called.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mpgrasp
