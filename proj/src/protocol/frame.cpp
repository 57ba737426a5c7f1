#include "cft/frame.hpp"

#include <algorithm>
#include <cstdio>

namespace cft {

bool is_known_opcode(std::uint8_t op) {
  switch (static_cast<Opcode>(op)) {
    case Opcode::Hello:
    case Opcode::Ok:
    case Opcode::Err:
    case Opcode::PutReq:
    case Opcode::Data:
    case Opcode::PutCommit:
    case Opcode::GetReq:
    case Opcode::FileInfo:
    case Opcode::Bye:
      return true;
  }
  return false;
}

std::string opcode_name(std::uint8_t op) {
  switch (static_cast<Opcode>(op)) {
    case Opcode::Hello: return "HELLO";
    case Opcode::Ok: return "OK";
    case Opcode::Err: return "ERR";
    case Opcode::PutReq: return "PUT_REQ";
    case Opcode::Data: return "DATA";
    case Opcode::PutCommit: return "PUT_COMMIT";
    case Opcode::GetReq: return "GET_REQ";
    case Opcode::FileInfo: return "FILE_INFO";
    case Opcode::Bye: return "BYE";
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "UNKNOWN(0x%02x)", op);
  return buf;
}

std::string err_code_name(std::uint8_t code) {
  switch (static_cast<ErrCode>(code)) {
    case ErrCode::UnknownOp: return "UNKNOWN_OP";
    case ErrCode::BadSequence: return "BAD_SEQUENCE";
    case ErrCode::PathDenied: return "PATH_DENIED";
    case ErrCode::InvalidValue: return "INVALID_VALUE";
    case ErrCode::FrameTooLarge: return "FRAME_TOO_LARGE";
    case ErrCode::Malformed: return "MALFORMED";
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "ERR(0x%02x)", code);
  return buf;
}

std::uint8_t checksum(ByteView payload) {
  std::uint8_t sum = 0;
  for (auto b : payload) sum ^= b;
  return sum;
}

Bytes encode_frame(std::uint8_t opcode, ByteView payload) {
  Frame frame;
  frame.opcode = opcode;
  frame.declared_length = static_cast<std::uint32_t>(payload.size());
  frame.payload.assign(payload.begin(), payload.end());
  frame.checksum = checksum(payload);
  return serialize_frame(frame);
}

Bytes serialize_frame(const Frame& frame) {
  Bytes out;
  out.reserve(kFrameOverhead + frame.payload.size());
  out.insert(out.end(), frame.magic.begin(), frame.magic.end());
  out.push_back(frame.version);
  out.push_back(frame.opcode);
  put_u32(out, frame.declared_length);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  out.push_back(frame.checksum);
  return out;
}

std::string_view violation_name(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::BadMagic: return "bad-magic";
    case ViolationKind::BadVersion: return "bad-version";
    case ViolationKind::LengthMismatch: return "length-mismatch";
    case ViolationKind::BadChecksum: return "bad-checksum";
    case ViolationKind::UnknownOpcode: return "unknown-opcode";
    case ViolationKind::Truncated: return "truncated";
    case ViolationKind::Oversized: return "oversized";
  }
  return "?";
}

bool DecodeReport::has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(), [kind](const Violation& v) { return v.kind == kind; });
}

namespace {

StreamEnd end_for(ReadStatus status) {
  switch (status) {
    case ReadStatus::Eof: return StreamEnd::Closed;
    case ReadStatus::Timeout: return StreamEnd::Timeout;
    case ReadStatus::Stopped: return StreamEnd::Stopped;
    case ReadStatus::Data: break;
  }
  return StreamEnd::None;
}

class FrameReader {
 public:
  FrameReader(ByteSource& stream, const DecodeOptions& options, DecodeReport& report)
      : stream_(stream), options_(options), report_(report) {
    if (!options.unbounded_idle) deadline_ = deadline_after(options.timeout);
  }

  // Reads exactly out.size() bytes; on failure records why in report_.end.
  bool read_exact(std::span<std::uint8_t> out) {
    std::size_t got = 0;
    while (got < out.size()) {
      const auto result = stream_.read_some(out.subspan(got), deadline_);
      if (result.status != ReadStatus::Data) {
        report_.end = end_for(result.status);
        return false;
      }
      if (report_.consumed == 0 && options_.unbounded_idle) deadline_ = deadline_after(options_.timeout);
      got += result.count;
      report_.consumed += result.count;
    }
    return true;
  }

 private:
  ByteSource& stream_;
  const DecodeOptions& options_;
  DecodeReport& report_;
  Deadline deadline_;
};

void add_truncated(DecodeReport& report, std::size_t expected) {
  if (report.idle()) return;
  std::string why = report.end == StreamEnd::Timeout ? "timed out" : "stream ended";
  report.violations.push_back({ViolationKind::Truncated, why + " after " + std::to_string(report.consumed) +
                                                             " of " + std::to_string(expected) + " bytes"});
}

}  // namespace

DecodeReport decode_frame(ByteSource& stream, const DecodeOptions& options) {
  DecodeReport report;
  FrameReader reader(stream, options, report);

  std::array<std::uint8_t, kHeaderSize> raw{};
  if (!reader.read_exact(raw)) {
    add_truncated(report, kHeaderSize);
    return report;
  }

  Frame frame;
  frame.magic = {raw[0], raw[1]};
  frame.version = raw[2];
  frame.opcode = raw[3];
  frame.declared_length = get_u32(raw, 4);
  report.header = frame;

  if (frame.magic != kMagic) {
    report.violations.push_back({ViolationKind::BadMagic, "magic " + hex_dump(frame.magic)});
  }
  if (frame.version != kVersion) {
    report.violations.push_back({ViolationKind::BadVersion, "version " + hex_dump(ByteView(&frame.version, 1))});
  }
  if (!is_known_opcode(frame.opcode)) {
    report.violations.push_back({ViolationKind::UnknownOpcode, opcode_name(frame.opcode)});
  }
  if (frame.declared_length > options.max_payload) {
    report.violations.push_back({ViolationKind::Oversized, "declared " + std::to_string(frame.declared_length) +
                                                               " exceeds limit " + std::to_string(options.max_payload)});
    report.end = StreamEnd::Limit;
    return report;
  }

  const std::size_t total = kFrameOverhead + frame.declared_length;
  // Grow with the bytes that actually arrive; a hostile length must not allocate up front.
  constexpr std::size_t kChunk = 64 * 1024;
  while (frame.payload.size() < frame.declared_length) {
    const auto at = frame.payload.size();
    const auto n = std::min<std::size_t>(kChunk, frame.declared_length - at);
    frame.payload.resize(at + n);
    if (!reader.read_exact(std::span(frame.payload).subspan(at, n))) {
      add_truncated(report, total);
      return report;
    }
  }
  std::uint8_t sum = 0;
  if (!reader.read_exact(std::span(&sum, 1))) {
    add_truncated(report, total);
    return report;
  }
  frame.checksum = sum;
  const auto expected = checksum(frame.payload);
  if (expected != sum) {
    report.violations.push_back({ViolationKind::BadChecksum, "checksum " + hex_dump(ByteView(&sum, 1)) +
                                                                 ", computed " + hex_dump(ByteView(&expected, 1))});
  }
  report.header = frame;
  report.header->payload.clear();
  report.frame = std::move(frame);
  return report;
}

DecodeReport decode_frame(ByteView bytes) {
  MemorySource source(Bytes(bytes.begin(), bytes.end()));
  DecodeOptions options;
  options.timeout = std::nullopt;
  return decode_frame(source, options);
}

ReadResult MemorySource::read_some(std::span<std::uint8_t> out, Deadline) {
  if (pos_ >= data_.size()) return {ReadStatus::Eof, 0};
  const auto n = std::min({out.size(), data_.size() - pos_, chunk_});
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(pos_), n, out.begin());
  pos_ += n;
  return {ReadStatus::Data, n};
}

}  // namespace cft
