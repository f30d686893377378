#pragma once

#include <memory>
#include <string>

namespace zoomin::rewards {

/// Stateless HTTP scoring service:
///   POST /v1/reward/stage1   single request object or array (GRPO groups)
///   POST /v1/reward/stage2   same shape rule
///   GET  /healthz
/// Malformed JSON or bad request shapes return 400 with an error body;
/// scoring itself never 500s on odd completion text.
class RewardServer {
 public:
  RewardServer();
  ~RewardServer();
  RewardServer(const RewardServer&) = delete;
  RewardServer& operator=(const RewardServer&) = delete;

  /// Binds and starts serving on a background thread. port 0 picks an
  /// ephemeral port (see port()). Returns false on bind failure.
  bool start(const std::string& bind_address, int port);
  int port() const;
  /// Blocks until stop() is called (for CLI foreground serving).
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace zoomin::rewards
