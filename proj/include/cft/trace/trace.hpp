#pragma once

// Wire capture for CFT sessions.
//
// On disk a trace is one record per line:
//
//   <timestamp_ms> <C2S|S2C> <hex>
//
// timestamp_ms counts milliseconds since the sink was opened, hex is lowercase with no
// separators. Every record is flushed as soon as it is written.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cft/bytes.hpp"
#include "cft/frame.hpp"

namespace cft::trace {

enum class Direction { ClientToServer, ServerToClient };

std::string_view direction_tag(Direction direction);  // "C2S" / "S2C"

struct TraceRecord {
  std::uint64_t timestamp_ms = 0;
  Direction direction = Direction::ClientToServer;
  Bytes bytes;

  bool operator==(const TraceRecord&) const = default;
};

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  /// Appends one record. Empty byte runs are skipped. Throws TraceError if the write fails.
  virtual void record(Direction direction, ByteView bytes) = 0;
};

class FileTraceSink final : public TraceSink {
 public:
  /// Truncates or creates `path`. Throws TraceError when it cannot be opened.
  explicit FileTraceSink(const std::filesystem::path& path);
  void record(Direction direction, ByteView bytes) override;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::chrono::steady_clock::time_point start_;
  std::uint64_t last_ms_ = 0;
  std::mutex mutex_;
};

class MemoryTraceSink final : public TraceSink {
 public:
  MemoryTraceSink();
  void record(Direction direction, ByteView bytes) override;
  std::vector<TraceRecord> records() const;

  /// Every byte recorded in one direction, in order.
  Bytes stream(Direction direction) const;

 private:
  std::vector<TraceRecord> records_;
  std::chrono::steady_clock::time_point start_;
  mutable std::mutex mutex_;
};

/// Forwards every record to two sinks.
class TeeSink final : public TraceSink {
 public:
  TeeSink(TraceSink& first, TraceSink* second) : first_(first), second_(second) {}
  void record(Direction direction, ByteView bytes) override {
    first_.record(direction, bytes);
    if (second_ != nullptr) second_->record(direction, bytes);
  }

 private:
  TraceSink& first_;
  TraceSink* second_;
};

std::string format_record(const TraceRecord& record);

struct CorruptLine {
  std::size_t line_number = 0;
  std::string text;
  std::string reason;
};

struct LoadedTrace {
  std::vector<TraceRecord> records;
  std::vector<CorruptLine> corrupt;
};

/// Parses trace text. Lines that do not parse are collected in `corrupt`.
LoadedTrace parse_trace(std::string_view text);

/// Reads a trace file without modifying it. Throws TraceError when it cannot be read.
LoadedTrace load_trace(const std::filesystem::path& path);

Bytes direction_stream(const LoadedTrace& trace, Direction direction);

// Offline review ------------------------------------------------------------

struct FrameEntry {
  Direction direction;
  std::uint64_t timestamp_ms = 0;
  std::size_t offset = 0;  // within the direction's byte stream
  std::uint8_t opcode = 0;
  std::uint32_t declared_length = 0;
  /// Payload length the bytes support, inferred by finding where the next frame begins.
  /// Equal to declared_length for a consistent frame; nullopt when it cannot be inferred.
  std::optional<std::uint32_t> actual_length;
  bool checksum_ok = false;
  std::vector<Violation> violations;
  std::string summary;
};

struct ResidueEntry {
  Direction direction;
  std::uint64_t timestamp_ms = 0;
  std::size_t offset = 0;
  Bytes bytes;
};

struct CorruptEntry {
  CorruptLine line;
};

using ListingEntry = std::variant<FrameEntry, ResidueEntry, CorruptEntry>;

struct TraceListing {
  std::vector<ListingEntry> entries;

  std::size_t frame_count() const;
  std::size_t violation_count() const;
  bool has_violation(ViolationKind kind) const;
  std::size_t residue_bytes() const;
};

/// Re-frames each direction independently, reading frames strictly by their declared
/// length the way a receiver would. Bytes that cannot start a frame are reported as residue.
TraceListing review(const LoadedTrace& trace);

std::string render(const TraceListing& listing);

}  // namespace cft::trace
