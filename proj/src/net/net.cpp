#include "cft/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

namespace cft::net {

namespace {

constexpr int kPollSliceMs = 50;

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

sockaddr_in resolve(const Endpoint& endpoint) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(endpoint.port);
  if (endpoint.host.empty() || endpoint.host == "0.0.0.0") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    return addr;
  }
  if (inet_pton(AF_INET, endpoint.host.c_str(), &addr.sin_addr) == 1) return addr;

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (getaddrinfo(endpoint.host.c_str(), nullptr, &hints, &found) != 0 || found == nullptr) {
    throw NetError("cannot resolve host " + endpoint.host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(found->ai_addr)->sin_addr;
  freeaddrinfo(found);
  return addr;
}

int remaining_ms(const Deadline& deadline) {
  if (!deadline) return kPollSliceMs;
  const auto left = std::chrono::duration_cast<Millis>(*deadline - Clock::now()).count();
  if (left <= 0) return 0;
  return static_cast<int>(std::min<long long>(left, kPollSliceMs));
}

}  // namespace

Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon + 1 >= text.size()) {
    throw std::invalid_argument("address must be host:port, got '" + std::string(text) + "'");
  }
  unsigned port = 0;
  const auto digits = text.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || port > 65535) {
    throw std::invalid_argument("bad port in '" + std::string(text) + "'");
  }
  Endpoint endpoint;
  endpoint.host = std::string(text.substr(0, colon));
  if (endpoint.host.empty()) endpoint.host = "127.0.0.1";
  endpoint.port = static_cast<std::uint16_t>(port);
  return endpoint;
}

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.release();
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::shutdown_write() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
}

void Socket::abort() {
  if (fd_ < 0) return;
  linger lin{1, 0};
  ::setsockopt(fd_, SOL_SOCKET, SO_LINGER, &lin, sizeof lin);
  close();
}

void Socket::close_gracefully(Millis linger) {
  if (fd_ < 0) return;
  ::shutdown(fd_, SHUT_WR);
  const auto deadline = Clock::now() + linger;
  std::uint8_t sink[4096];
  while (Clock::now() < deadline) {
    pollfd pfd{fd_, POLLIN, 0};
    const auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
    if (::poll(&pfd, 1, static_cast<int>(std::max<long long>(left, 0))) <= 0) break;
    const auto n = ::recv(fd_, sink, sizeof sink, 0);
    if (n <= 0) break;
  }
  close();
}

std::string Socket::peer_name() const {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  if (fd_ < 0 || ::getpeername(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) return "?";
  char host[INET_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET, &addr.sin_addr, host, sizeof host);
  return std::string(host) + ":" + std::to_string(ntohs(addr.sin_port));
}

Socket connect_tcp(const Endpoint& endpoint, Millis timeout) {
  const auto addr = resolve(endpoint);
  Socket sock(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock.valid()) throw NetError(errno_text("socket"));

  const int flags = ::fcntl(sock.fd(), F_GETFL, 0);
  ::fcntl(sock.fd(), F_SETFL, flags | O_NONBLOCK);
  if (::connect(sock.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    if (errno != EINPROGRESS) throw NetError("connect " + endpoint.to_string() + ": " + std::strerror(errno));
    pollfd pfd{sock.fd(), POLLOUT, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (ready == 0) throw NetError("connect " + endpoint.to_string() + ": timed out");
    int err = 0;
    socklen_t len = sizeof err;
    ::getsockopt(sock.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (ready < 0 || err != 0) {
      throw NetError("connect " + endpoint.to_string() + ": " + std::strerror(err != 0 ? err : errno));
    }
  }
  ::fcntl(sock.fd(), F_SETFL, flags);
  int one = 1;
  ::setsockopt(sock.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return sock;
}

Socket listen_tcp(const Endpoint& endpoint, int backlog) {
  const auto addr = resolve(endpoint);
  Socket sock(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock.valid()) throw NetError(errno_text("socket"));
  int one = 1;
  ::setsockopt(sock.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(sock.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    throw NetError("bind " + endpoint.to_string() + ": " + std::strerror(errno));
  }
  if (::listen(sock.fd(), backlog) != 0) throw NetError(errno_text("listen"));
  return sock;
}

Endpoint local_endpoint(const Socket& socket) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  if (::getsockname(socket.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) throw NetError(errno_text("getsockname"));
  char host[INET_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET, &addr.sin_addr, host, sizeof host);
  return Endpoint{host, ntohs(addr.sin_port)};
}

ReadResult SocketSource::read_some(std::span<std::uint8_t> out, Deadline deadline) {
  for (;;) {
    if (stop_.stop_requested()) return {ReadStatus::Stopped, 0};
    const int wait = remaining_ms(deadline);
    if (deadline && wait == 0) return {ReadStatus::Timeout, 0};
    pollfd pfd{socket_.fd(), POLLIN, 0};
    const int ready = ::poll(&pfd, 1, wait);
    if (ready < 0) {
      if (errno == EINTR) continue;
      return {ReadStatus::Eof, 0};
    }
    if (ready == 0) continue;
    const auto n = ::recv(socket_.fd(), out.data(), out.size(), 0);
    if (n > 0) return {ReadStatus::Data, static_cast<std::size_t>(n)};
    if (n < 0 && (errno == EINTR || errno == EAGAIN)) continue;
    return {ReadStatus::Eof, 0};
  }
}

bool SocketSink::write_all(ByteView bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const auto n = ::send(socket_.fd(), bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace cft::net
