#pragma once

#include <chrono>
#include <cstddef>
#include <optional>

#include "cft/bytes.hpp"

namespace cft {

using Clock = std::chrono::steady_clock;
using Millis = std::chrono::milliseconds;

/// A point in time after which a blocking read gives up. nullopt waits forever.
using Deadline = std::optional<Clock::time_point>;

inline Deadline deadline_after(std::optional<Millis> timeout) {
  if (!timeout) return std::nullopt;
  return Clock::now() + *timeout;
}

enum class ReadStatus {
  Data,     // at least one byte was read
  Eof,      // peer closed (or source exhausted)
  Timeout,  // deadline passed with nothing read
  Stopped,  // reader was asked to stop (server shutdown)
};

struct ReadResult {
  ReadStatus status = ReadStatus::Eof;
  std::size_t count = 0;
};

class ByteSource {
 public:
  virtual ~ByteSource() = default;

  /// Blocks until at least one byte is available, the stream ends, or the deadline passes.
  virtual ReadResult read_some(std::span<std::uint8_t> out, Deadline deadline) = 0;
};

class ByteSink {
 public:
  virtual ~ByteSink() = default;

  /// Writes every byte or returns false (peer gone).
  virtual bool write_all(ByteView bytes) = 0;
};

/// In-memory source. Optionally hands out at most `chunk` bytes per read so tests can
/// exercise partial reads. Once exhausted it reports Eof.
class MemorySource final : public ByteSource {
 public:
  explicit MemorySource(Bytes data, std::size_t chunk = SIZE_MAX) : data_(std::move(data)), chunk_(chunk) {}

  ReadResult read_some(std::span<std::uint8_t> out, Deadline) override;

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  Bytes data_;
  std::size_t pos_ = 0;
  std::size_t chunk_;
};

class MemorySink final : public ByteSink {
 public:
  bool write_all(ByteView bytes) override {
    data_.insert(data_.end(), bytes.begin(), bytes.end());
    return true;
  }
  const Bytes& data() const { return data_; }

 private:
  Bytes data_;
};

}  // namespace cft
