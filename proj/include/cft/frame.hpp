#pragma once

// CFT wire framing.
//
//   offset  size  field
//   0       2     magic 0x46 0x54 ("FT")
//   2       1     version 0x01
//   3       1     opcode
//   4       4     declared_length, big-endian, payload bytes
//   8       n     payload
//   8+n     1     checksum, XOR of all payload bytes
//
// See docs/wire-format.md for the payload layouts.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cft/byte_stream.hpp"
#include "cft/bytes.hpp"

namespace cft {

inline constexpr std::array<std::uint8_t, 2> kMagic{0x46, 0x54};
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 8;
inline constexpr std::size_t kFrameOverhead = kHeaderSize + 1;

enum class Opcode : std::uint8_t {
  Hello = 0x01,
  Ok = 0x02,
  Err = 0x03,
  PutReq = 0x10,
  Data = 0x11,
  PutCommit = 0x12,
  GetReq = 0x20,
  FileInfo = 0x21,
  Bye = 0x7F,
};

bool is_known_opcode(std::uint8_t op);

/// "HELLO", "PUT_REQ", ... or "UNKNOWN(0x55)".
std::string opcode_name(std::uint8_t op);

/// Error codes carried by Err replies.
enum class ErrCode : std::uint8_t {
  UnknownOp = 0x01,
  BadSequence = 0x02,
  PathDenied = 0x03,
  InvalidValue = 0x04,
  FrameTooLarge = 0x05,
  Malformed = 0x06,
};

std::string err_code_name(std::uint8_t code);

struct Frame {
  std::array<std::uint8_t, 2> magic = kMagic;
  std::uint8_t version = kVersion;
  std::uint8_t opcode = 0;
  std::uint32_t declared_length = 0;
  Bytes payload;
  std::uint8_t checksum = 0;

  bool operator==(const Frame&) const = default;
};

std::uint8_t checksum(ByteView payload);

/// Emits a well-formed frame: header, payload, checksum. Size is always 9 + payload size.
Bytes encode_frame(std::uint8_t opcode, ByteView payload);
inline Bytes encode_frame(Opcode opcode, ByteView payload) {
  return encode_frame(static_cast<std::uint8_t>(opcode), payload);
}

/// Serializes a frame field by field, including any inconsistent values it holds.
Bytes serialize_frame(const Frame& frame);

enum class ViolationKind {
  BadMagic,
  BadVersion,
  LengthMismatch,
  BadChecksum,
  UnknownOpcode,
  Truncated,
  Oversized,  // declared_length exceeds the reader's limit; payload was not read
};

std::string_view violation_name(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

/// Why a decode attempt ended without a complete frame.
enum class StreamEnd {
  None,     // a frame (possibly with violations) was read in full
  Closed,   // stream ended
  Timeout,  // deadline passed
  Stopped,  // reader stop requested
  Limit,    // oversized frame, reading abandoned after the header
};

struct DecodeReport {
  /// Present when header, payload and checksum were all read.
  std::optional<Frame> frame;
  /// Header fields when at least the header was read (also set alongside `frame`).
  std::optional<Frame> header;
  std::vector<Violation> violations;
  std::size_t consumed = 0;
  StreamEnd end = StreamEnd::None;

  /// No bytes at all were read: the stream was idle, not a frame attempt.
  bool idle() const { return consumed == 0 && end != StreamEnd::None; }
  bool well_formed() const { return frame.has_value() && violations.empty(); }
  bool has(ViolationKind kind) const;
};

struct DecodeOptions {
  /// Deadline for the whole frame, counted from the call.
  std::optional<Millis> timeout = Millis{2000};
  /// When set, the wait for the first byte is unbounded and `timeout` starts at the first byte.
  bool unbounded_idle = false;
  /// Largest declared_length the reader will actually consume.
  std::uint32_t max_payload = UINT32_MAX;
};

inline constexpr Millis kDefaultReadTimeout{2000};

DecodeReport decode_frame(ByteSource& stream, const DecodeOptions& options);

inline DecodeReport decode_frame(ByteSource& stream, Millis timeout) {
  DecodeOptions options;
  options.timeout = timeout;
  return decode_frame(stream, options);
}

/// Decodes one frame from the front of a buffer; never blocks.
DecodeReport decode_frame(ByteView bytes);

}  // namespace cft
