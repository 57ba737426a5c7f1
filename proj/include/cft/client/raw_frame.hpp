#pragma once

#include <array>
#include <optional>

#include "cft/frame.hpp"
#include "cft/payload.hpp"

namespace cft::client {

/// A frame whose every wire field can be set independently of the others. Fields left
/// at auto produce exactly what encode_frame would.
struct RawFrameSpec {
  std::array<std::uint8_t, 2> magic = kMagic;
  std::uint8_t version = kVersion;
  std::uint8_t opcode = 0;
  std::optional<std::uint32_t> declared_length;  // nullopt: payload size
  Bytes payload;
  std::optional<std::uint8_t> checksum;  // nullopt: XOR of payload
  Bytes trailing_garbage;

  /// The exact bytes of this frame as written. Never normalizes anything.
  Bytes resolve() const;

  static RawFrameSpec honest(std::uint8_t opcode, Bytes payload);
  static RawFrameSpec honest(const OpPayload& payload);

  RawFrameSpec& with_declared_length(std::uint32_t length) {
    declared_length = length;
    return *this;
  }
  RawFrameSpec& with_checksum(std::uint8_t sum) {
    checksum = sum;
    return *this;
  }
  RawFrameSpec& with_garbage(Bytes garbage) {
    trailing_garbage = std::move(garbage);
    return *this;
  }
};

}  // namespace cft::client
