#pragma once

#include <atomic>
#include <list>
#include <memory>
#include <mutex>
#include <thread>

#include "cft/net.hpp"
#include "cft/server/config.hpp"
#include "cft/server/session.hpp"

namespace cft::server {

/// A running CFT server. Each accepted connection gets its own thread and SessionState;
/// sessions share only the read-only config and SharedState.
class Server {
 public:
  /// Validates the config, plants `secret.txt` (holding the canary) in the parent of the
  /// sandbox root, binds, and starts accepting. Throws ConfigError or net::NetError.
  static std::unique_ptr<Server> start(ServerConfig config);

  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  const net::Endpoint& endpoint() const { return endpoint_; }
  const ServerConfig& config() const { return config_; }
  std::uint64_t crash_count() const { return crashes_.load(); }
  std::uint64_t sessions_accepted() const { return accepted_.load(); }
  std::size_t active_sessions() const;

  /// Closes the listener and drops every session; returns once all threads are joined.
  void shutdown();

 private:
  explicit Server(ServerConfig config);
  void accept_loop(std::stop_token stop);
  void serve_connection(net::Socket socket, std::stop_token stop);
  void reap_finished();

  struct Worker {
    std::jthread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  ServerConfig config_;
  std::filesystem::path root_;
  net::Socket listener_;
  net::Endpoint endpoint_;
  SharedState shared_;
  std::atomic<std::uint64_t> crashes_{0};
  std::atomic<std::uint64_t> accepted_{0};
  mutable std::mutex workers_mutex_;
  std::list<Worker> workers_;
  std::jthread acceptor_;
  std::once_flag shutdown_once_;
};

}  // namespace cft::server
