#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cft/client/raw_frame.hpp"
#include "cft/net.hpp"
#include "cft/payload.hpp"
#include "cft/trace/trace.hpp"

namespace cft::client {

inline constexpr Millis kDefaultReceiveTimeout{3000};
inline constexpr Millis kDefaultConnectTimeout{3000};

struct Reply {
  DecodeReport report;

  /// Typed payload when the frame decoded cleanly.
  std::optional<OpPayload> payload() const;
  /// Raw payload bytes of the frame, empty when no frame was read.
  ByteView bytes() const;
  bool is_ok() const;
  bool is_err() const;
  std::optional<std::uint8_t> err_code() const;
  std::string describe() const;
};

struct Closed {};
struct Timeout {};

using ServerEvent = std::variant<Reply, Closed, Timeout>;

std::string describe(const ServerEvent& event);

class ConnectError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ClientPhase { Start, Greeted, Closed };

struct TransferResult {
  std::vector<ServerEvent> replies;
  std::size_t data_frames = 0;
  std::optional<std::uint8_t> error_code;  // first Err reply
  bool aborted = false;                     // timeout or connection loss

  bool ok() const { return !error_code && !aborted; }
};

struct GetResult {
  std::vector<ServerEvent> replies;
  Bytes content;
  std::optional<std::uint8_t> error_code;
  bool aborted = false;

  bool ok() const { return !error_code && !aborted; }
};

/// One client connection. The raw layer (send_raw/receive) is stateless and sends exactly
/// what it is given; the honest layer (hello/put_file/get_file/bye) tracks its own phase.
/// Not thread-safe: one Session belongs to one thread.
class Session {
 public:
  /// Throws ConnectError when the server cannot be reached.
  static Session connect(const net::Endpoint& endpoint, trace::TraceSink* trace = nullptr,
                         Millis timeout = kDefaultConnectTimeout);

  Session(Session&&) noexcept = default;
  Session& operator=(Session&&) noexcept = default;

  /// Writes spec.resolve() to the socket and returns those bytes. A dead connection is
  /// not reported here; the next receive() yields Closed.
  Bytes send_raw(const RawFrameSpec& spec);
  Bytes send(const OpPayload& payload) { return send_raw(RawFrameSpec::honest(payload)); }

  /// Exactly one event per call.
  ServerEvent receive(Millis timeout = kDefaultReceiveTimeout);

  ServerEvent hello(std::string_view client_id);
  TransferResult put_file(std::string_view filename, ByteView content, std::uint16_t block_size);
  GetResult get_file(std::string_view filename);
  ServerEvent bye();

  ClientPhase phase() const { return phase_; }
  void set_receive_timeout(Millis timeout) { receive_timeout_ = timeout; }
  Millis receive_timeout() const { return receive_timeout_; }

  /// Stop sending; the server sees end of stream but replies can still be read.
  void finish_sending() { socket_.shutdown_write(); }
  void close() { socket_.close(); }

 private:
  Session(net::Socket socket, trace::TraceSink* trace) : socket_(std::move(socket)), trace_(trace) {}

  net::Socket socket_;
  trace::TraceSink* trace_ = nullptr;
  ClientPhase phase_ = ClientPhase::Start;
  bool broken_ = false;
  Millis receive_timeout_ = kDefaultReceiveTimeout;
};

}  // namespace cft::client
