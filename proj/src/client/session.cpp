#include "cft/client/session.hpp"

#include <stdexcept>

namespace cft::client {

namespace {

constexpr std::uint32_t kMaxReplyPayload = 16u << 20;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Mirrors every byte read from the server into the trace.
class TracingSource final : public ByteSource {
 public:
  TracingSource(ByteSource& inner, trace::TraceSink* trace) : inner_(inner), trace_(trace) {}
  ReadResult read_some(std::span<std::uint8_t> out, Deadline deadline) override {
    auto result = inner_.read_some(out, deadline);
    if (result.status == ReadStatus::Data && trace_ != nullptr) {
      trace_->record(trace::Direction::ServerToClient, out.first(result.count));
    }
    return result;
  }

 private:
  ByteSource& inner_;
  trace::TraceSink* trace_;
};

bool is_failure(const ServerEvent& event) { return !std::holds_alternative<Reply>(event); }

}  // namespace

std::optional<OpPayload> Reply::payload() const {
  if (!report.frame) return std::nullopt;
  auto decoded = decode_payload(report.frame->opcode, report.frame->payload);
  if (const auto* value = payload_value(decoded)) return *value;
  return std::nullopt;
}

ByteView Reply::bytes() const {
  if (!report.frame) return {};
  return report.frame->payload;
}

bool Reply::is_ok() const {
  return report.well_formed() && report.frame->opcode == static_cast<std::uint8_t>(Opcode::Ok);
}

bool Reply::is_err() const {
  return report.frame && report.frame->opcode == static_cast<std::uint8_t>(Opcode::Err);
}

std::optional<std::uint8_t> Reply::err_code() const {
  if (!is_err() || report.frame->payload.empty()) return std::nullopt;
  return report.frame->payload.front();
}

std::string Reply::describe() const {
  std::string out;
  if (auto p = payload()) {
    out = summarize(*p);
  } else if (report.frame) {
    out = opcode_name(report.frame->opcode) + " (undecodable payload, " + std::to_string(report.frame->payload.size()) +
          " bytes)";
  } else {
    out = "partial frame";
  }
  for (const auto& v : report.violations) out += " [" + std::string(violation_name(v.kind)) + ": " + v.detail + "]";
  return out;
}

std::string describe(const ServerEvent& event) {
  return std::visit(overloaded{
                        [](const Reply& r) { return "reply " + r.describe(); },
                        [](const Closed&) { return std::string("closed"); },
                        [](const Timeout&) { return std::string("timeout"); },
                    },
                    event);
}

Session Session::connect(const net::Endpoint& endpoint, trace::TraceSink* trace, Millis timeout) {
  try {
    return Session(net::connect_tcp(endpoint, timeout), trace);
  } catch (const net::NetError& e) {
    throw ConnectError(e.what());
  }
}

Bytes Session::send_raw(const RawFrameSpec& spec) {
  auto bytes = spec.resolve();
  if (trace_ != nullptr) trace_->record(trace::Direction::ClientToServer, bytes);
  if (!broken_ && socket_.valid()) {
    net::SocketSink sink(socket_);
    if (!sink.write_all(bytes)) broken_ = true;
  }
  return bytes;
}

ServerEvent Session::receive(Millis timeout) {
  if (!socket_.valid()) return Closed{};
  net::SocketSource raw(socket_);
  TracingSource source(raw, trace_);
  DecodeOptions options;
  options.timeout = timeout;
  options.max_payload = kMaxReplyPayload;
  auto report = decode_frame(source, options);
  if (report.idle()) {
    if (report.end == StreamEnd::Timeout) return Timeout{};
    broken_ = true;
    return Closed{};
  }
  if (report.end == StreamEnd::Closed) broken_ = true;
  return Reply{std::move(report)};
}

ServerEvent Session::hello(std::string_view client_id) {
  send(msg::Hello{std::string(client_id)});
  auto event = receive(receive_timeout_);
  if (const auto* r = std::get_if<Reply>(&event); r && r->is_ok()) phase_ = ClientPhase::Greeted;
  return event;
}

TransferResult Session::put_file(std::string_view filename, ByteView content, std::uint16_t block_size) {
  if (phase_ != ClientPhase::Greeted) throw std::logic_error("put_file needs a greeted session");
  if (block_size == 0) throw std::invalid_argument("block_size must be nonzero");

  TransferResult result;
  // Returns false when the transfer must stop.
  auto step = [&](const OpPayload& payload) {
    send(payload);
    auto event = receive(receive_timeout_);
    const bool failed = is_failure(event);
    std::optional<std::uint8_t> code;
    if (const auto* r = std::get_if<Reply>(&event)) {
      if (r->is_err()) code = r->err_code().value_or(0);
      else if (!r->is_ok()) code = static_cast<std::uint8_t>(0);
    }
    result.replies.push_back(std::move(event));
    if (failed) {
      result.aborted = true;
      return false;
    }
    if (code) {
      result.error_code = code;
      return false;
    }
    return true;
  };

  if (!step(msg::PutReq{std::string(filename), static_cast<std::uint32_t>(content.size()), block_size})) return result;
  for (std::size_t offset = 0, index = 0; offset < content.size(); offset += block_size, ++index) {
    const auto end = std::min(content.size(), offset + block_size);
    ++result.data_frames;
    if (!step(msg::Data{static_cast<std::uint32_t>(index), Bytes(content.begin() + static_cast<std::ptrdiff_t>(offset),
                                                                 content.begin() + static_cast<std::ptrdiff_t>(end))})) {
      return result;
    }
  }
  step(msg::PutCommit{});
  return result;
}

GetResult Session::get_file(std::string_view filename) {
  if (phase_ != ClientPhase::Greeted) throw std::logic_error("get_file needs a greeted session");
  GetResult result;
  send(msg::GetReq{std::string(filename)});
  auto first = receive(receive_timeout_);
  const auto* reply = std::get_if<Reply>(&first);
  if (reply == nullptr) {
    result.aborted = true;
    result.replies.push_back(std::move(first));
    return result;
  }
  const auto payload = reply->payload();
  const auto* info = payload ? std::get_if<msg::FileInfo>(&*payload) : nullptr;
  if (info == nullptr) {
    result.error_code = reply->err_code().value_or(0);
    result.replies.push_back(std::move(first));
    return result;
  }
  const auto size = info->file_size;
  result.replies.push_back(std::move(first));
  while (result.content.size() < size) {
    auto event = receive(receive_timeout_);
    const auto* r = std::get_if<Reply>(&event);
    const auto p = r ? r->payload() : std::nullopt;
    const auto* data = p ? std::get_if<msg::Data>(&*p) : nullptr;
    if (data == nullptr || data->data.empty()) {
      result.aborted = true;
      result.replies.push_back(std::move(event));
      return result;
    }
    result.content.insert(result.content.end(), data->data.begin(), data->data.end());
    result.replies.push_back(std::move(event));
  }
  return result;
}

ServerEvent Session::bye() {
  send(msg::Bye{});
  auto event = receive(receive_timeout_);
  phase_ = ClientPhase::Closed;
  return event;
}

}  // namespace cft::client
