#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <stop_token>
#include <string>

#include "cft/byte_stream.hpp"

namespace cft::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string to_string() const { return host + ":" + std::to_string(port); }
  bool operator==(const Endpoint&) const = default;
};

/// Parses "host:port". Throws std::invalid_argument on a malformed address.
Endpoint parse_endpoint(std::string_view text);

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Owning file descriptor for a TCP socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() {
    int fd = fd_;
    fd_ = -1;
    return fd;
  }
  void close();

  /// Half-close: no more writes from this side.
  void shutdown_write();

  /// Close with RST instead of FIN.
  void abort();

  /// Sends FIN, then discards inbound bytes until the peer closes or `linger` passes.
  void close_gracefully(Millis linger);

  std::string peer_name() const;

 private:
  int fd_ = -1;
};

/// Connects with a bounded wait. Throws NetError on refusal or timeout.
Socket connect_tcp(const Endpoint& endpoint, Millis timeout);

/// Binds and listens. Port 0 picks an ephemeral port. Throws NetError.
Socket listen_tcp(const Endpoint& endpoint, int backlog = 64);

Endpoint local_endpoint(const Socket& socket);

/// Reads from a socket in short poll slices so a stop request is honored promptly.
class SocketSource final : public ByteSource {
 public:
  explicit SocketSource(const Socket& socket, std::stop_token stop = {}) : socket_(socket), stop_(std::move(stop)) {}
  ReadResult read_some(std::span<std::uint8_t> out, Deadline deadline) override;

 private:
  const Socket& socket_;
  std::stop_token stop_;
};

class SocketSink final : public ByteSink {
 public:
  explicit SocketSink(const Socket& socket) : socket_(socket) {}
  bool write_all(ByteView bytes) override;

 private:
  const Socket& socket_;
};

}  // namespace cft::net
