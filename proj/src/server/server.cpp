#include "cft/server/server.hpp"

#include <poll.h>
#include <sys/socket.h>

#include <cerrno>
#include <fstream>

namespace cft::server {

namespace fs = std::filesystem;

namespace {
constexpr Millis kCloseLinger{100};
}

std::unique_ptr<Server> Server::start(ServerConfig config) {
  validate(config);
  std::unique_ptr<Server> server(new Server(std::move(config)));

  const auto secret = server->root_.parent_path() / "secret.txt";
  {
    std::ofstream out(secret, std::ios::binary | std::ios::trunc);
    out << server->config_.canary_secret;
    if (!out) throw ConfigError("cannot write " + secret.string());
  }

  server->listener_ = net::listen_tcp(server->config_.listen);
  server->endpoint_ = net::local_endpoint(server->listener_);
  if (server->config_.listen.host != "0.0.0.0" && !server->config_.listen.host.empty()) {
    server->endpoint_.host = server->config_.listen.host;
  }
  server->acceptor_ = std::jthread([raw = server.get()](std::stop_token stop) { raw->accept_loop(stop); });
  return server;
}

Server::Server(ServerConfig config) : config_(std::move(config)) {
  std::error_code ec;
  root_ = fs::canonical(config_.sandbox_root, ec);
  if (ec) throw ConfigError("cannot resolve sandbox root " + config_.sandbox_root.string());
}

Server::~Server() { shutdown(); }

void Server::shutdown() {
  std::call_once(shutdown_once_, [this] {
    acceptor_.request_stop();
    if (acceptor_.joinable()) acceptor_.join();
    listener_.close();
    std::list<Worker> workers;
    {
      std::lock_guard lock(workers_mutex_);
      workers.swap(workers_);
    }
    for (auto& worker : workers) worker.thread.request_stop();
    for (auto& worker : workers) {
      if (worker.thread.joinable()) worker.thread.join();
    }
  });
}

std::size_t Server::active_sessions() const {
  std::lock_guard lock(workers_mutex_);
  std::size_t n = 0;
  for (const auto& worker : workers_) n += worker.done->load() ? 0 : 1;
  return n;
}

void Server::reap_finished() {
  std::list<Worker> finished;
  {
    std::lock_guard lock(workers_mutex_);
    for (auto it = workers_.begin(); it != workers_.end();) {
      if (it->done->load()) {
        auto next = std::next(it);
        finished.splice(finished.end(), workers_, it);
        it = next;
      } else {
        ++it;
      }
    }
  }
  // jthread destructors join outside the lock
}

void Server::accept_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    pollfd pfd{listener_.fd(), POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 50);
    reap_finished();
    if (ready <= 0) continue;
    const int fd = ::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    ++accepted_;

    auto done = std::make_shared<std::atomic<bool>>(false);
    std::lock_guard lock(workers_mutex_);
    workers_.push_back(Worker{
        std::jthread([this, fd, done](std::stop_token session_stop) {
          try {
            serve_connection(net::Socket(fd), session_stop);
          } catch (...) {
            // a broken session never takes the accept loop down
          }
          done->store(true);
        }),
        done});
  }
}

void Server::serve_connection(net::Socket socket, std::stop_token stop) {
  SessionState state;
  state.peer = socket.peer_name();
  state.id = shared_.register_session(state.peer);

  SessionContext context{config_, root_, shared_};
  net::SocketSource in(socket, stop);
  net::SocketSink out(socket);
  const auto outcome = run_session(in, out, state, context);
  shared_.unregister_session(state.id);

  if (outcome.disposition == Disposition::Abort) {
    ++crashes_;
    socket.abort();
  } else if (stop.stop_requested()) {
    socket.close();
  } else {
    socket.close_gracefully(kCloseLinger);
  }
}

}  // namespace cft::server
