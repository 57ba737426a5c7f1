#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cft/frame.hpp"
#include "cft/payload.hpp"
#include "cft/server/config.hpp"

namespace cft::server {

// Normative constants of the simulated memory model.
inline constexpr std::size_t kLeakWindow = 64;       // max bytes an overrun reply discloses
inline constexpr std::size_t kCrashThreshold = 256;  // overrun beyond this aborts the session
inline constexpr std::size_t kAdjacentRegionSize = 512;

inline constexpr std::size_t kMaxNameLength = 255;           // filenames and client ids
inline constexpr std::uint32_t kMaxFramePayload = 1u << 20;  // larger frames are refused unread
inline constexpr std::uint32_t kGetBlockSize = 1024;
inline constexpr std::size_t kStalePoolLimit = 8;

enum class Phase { Start, Greeted, Transferring, Closed };

std::string_view phase_name(Phase phase);

struct Transfer {
  std::string filename;
  std::filesystem::path path;
  std::uint32_t file_size = 0;
  std::uint16_t block_size = 0;
  std::uint64_t block_count = 0;
  std::set<std::uint32_t> blocks_received;
  Bytes buffer;
};

struct SessionState {
  Phase phase = Phase::Start;
  std::optional<Transfer> transfer;
  std::string peer;
  std::uint64_t id = 0;
};

enum class EventKind { Leak, SimulatedCrash, SequenceAcceptedIllegally };

std::string_view event_name(EventKind kind);

struct SessionEvent {
  EventKind kind;
  Bytes leaked;  // Leak only
  std::string detail;
};

enum class Disposition {
  Continue,
  Close,  // orderly close after the outbound frames
  Abort,  // simulated crash: drop the connection without replying
};

struct HandleResult {
  std::vector<OpPayload> outbound;
  std::vector<SessionEvent> events;
  Disposition disposition = Disposition::Continue;
};

/// State shared by all sessions of one server: the stale buffer pool (read only under F5)
/// and the session table (dumped only under F6). Every operation takes the lock.
class SharedState {
 public:
  std::uint64_t register_session(std::string peer);
  void update_phase(std::uint64_t id, Phase phase);
  void unregister_session(std::uint64_t id);
  std::string session_table() const;

  /// Returns a finished transfer buffer to the pool without scrubbing it.
  void retain_buffer(Bytes buffer);

  /// Writes `data` at the start of the most recently retained buffer and returns up to
  /// kLeakWindow bytes of that buffer's previous content that follow the write.
  Bytes write_into_stale(ByteView data);

  std::size_t pool_size() const;

 private:
  struct Entry {
    std::string peer;
    Phase phase;
  };
  mutable std::mutex mutex_;
  std::uint64_t next_id_ = 1;
  std::map<std::uint64_t, Entry> sessions_;
  std::deque<Bytes> pool_;
};

struct SessionContext {
  const ServerConfig& config;
  std::filesystem::path root;  // canonical sandbox root
  SharedState& shared;
};

/// Applies one decoded frame to a session. Deterministic for a given state, report,
/// configuration, shared state and sandbox content.
HandleResult handle_frame(SessionState& state, const DecodeReport& report, SessionContext& context);

/// The F2 overrun model and hardened block rules for a DATA frame inside a transfer.
HandleResult write_block(SessionState& state, const msg::Data& data, SessionContext& context);

/// Bytes of the simulated memory next to a transfer buffer: the canary repeated.
Bytes adjacent_region(std::string_view canary);

DecodeOptions decode_options_for(const ServerConfig& config);

struct SessionOutcome {
  Disposition disposition = Disposition::Close;
  std::vector<SessionEvent> events;
  std::size_t frames_handled = 0;
};

/// Reads frames until the peer leaves, the session closes, or a simulated crash.
SessionOutcome run_session(ByteSource& in, ByteSink& out, SessionState& state, SessionContext& context);

}  // namespace cft::server
