#include "cft/server/session.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cft/server/paths.hpp"

namespace cft::server {

namespace fs = std::filesystem;

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::Start: return "Start";
    case Phase::Greeted: return "Greeted";
    case Phase::Transferring: return "Transferring";
    case Phase::Closed: return "Closed";
  }
  return "?";
}

std::string_view event_name(EventKind kind) {
  switch (kind) {
    case EventKind::Leak: return "leak";
    case EventKind::SimulatedCrash: return "simulated-crash";
    case EventKind::SequenceAcceptedIllegally: return "sequence-accepted-illegally";
  }
  return "?";
}

std::uint64_t SharedState::register_session(std::string peer) {
  std::lock_guard lock(mutex_);
  const auto id = next_id_++;
  sessions_.emplace(id, Entry{std::move(peer), Phase::Start});
  return id;
}

void SharedState::update_phase(std::uint64_t id, Phase phase) {
  std::lock_guard lock(mutex_);
  if (auto it = sessions_.find(id); it != sessions_.end()) it->second.phase = phase;
}

void SharedState::unregister_session(std::uint64_t id) {
  std::lock_guard lock(mutex_);
  sessions_.erase(id);
}

std::string SharedState::session_table() const {
  std::lock_guard lock(mutex_);
  std::ostringstream out;
  out << "[";
  bool first = true;
  for (const auto& [id, entry] : sessions_) {
    if (!first) out << ", ";
    first = false;
    out << "#" << id << " " << entry.peer << " " << phase_name(entry.phase);
  }
  out << "]";
  return out.str();
}

void SharedState::retain_buffer(Bytes buffer) {
  std::lock_guard lock(mutex_);
  pool_.push_back(std::move(buffer));
  while (pool_.size() > kStalePoolLimit) pool_.pop_front();
}

Bytes SharedState::write_into_stale(ByteView data) {
  std::lock_guard lock(mutex_);
  if (pool_.empty()) pool_.emplace_back();
  Bytes& buffer = pool_.back();
  Bytes residue;
  if (buffer.size() > data.size()) {
    const auto n = std::min(kLeakWindow, buffer.size() - data.size());
    residue.assign(buffer.begin() + static_cast<std::ptrdiff_t>(data.size()),
                   buffer.begin() + static_cast<std::ptrdiff_t>(data.size() + n));
  }
  if (buffer.size() < data.size()) buffer.resize(data.size());
  std::copy(data.begin(), data.end(), buffer.begin());
  return residue;
}

std::size_t SharedState::pool_size() const {
  std::lock_guard lock(mutex_);
  return pool_.size();
}

Bytes adjacent_region(std::string_view canary) {
  Bytes region;
  region.reserve(kAdjacentRegionSize);
  while (!canary.empty() && region.size() < kAdjacentRegionSize) {
    for (char c : canary) {
      if (region.size() == kAdjacentRegionSize) break;
      region.push_back(static_cast<std::uint8_t>(c));
    }
  }
  return region;
}

DecodeOptions decode_options_for(const ServerConfig& config) {
  DecodeOptions options;
  options.unbounded_idle = true;
  options.max_payload = kMaxFramePayload;
  // F3: a legacy reader that waits as long as it takes for the declared length.
  if (config.flaws.f3_length_smearing) {
    options.timeout = std::nullopt;
  } else {
    options.timeout = config.read_timeout;
  }
  return options;
}

namespace {

HandleResult reply(OpPayload payload, Disposition disposition = Disposition::Continue) {
  HandleResult result;
  result.outbound.push_back(std::move(payload));
  result.disposition = disposition;
  return result;
}

HandleResult ok(std::string message) { return reply(msg::Ok{std::move(message)}); }

HandleResult err(ErrCode code, std::string message, Disposition disposition = Disposition::Continue) {
  return reply(msg::Err{static_cast<std::uint8_t>(code), std::move(message)}, disposition);
}

HandleResult crash(std::string detail) {
  HandleResult result;
  result.events.push_back({EventKind::SimulatedCrash, {}, std::move(detail)});
  result.disposition = Disposition::Abort;
  return result;
}

bool contains(ByteView haystack, std::string_view needle) {
  if (needle.empty()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

void note_leak(HandleResult& result, ByteView bytes, std::string detail) {
  result.events.push_back({EventKind::Leak, Bytes(bytes.begin(), bytes.end()), std::move(detail)});
}

std::string hex_byte(std::uint8_t b) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "0x%02x", b);
  return buf;
}

// Common name checks, independent of any flaw.
std::optional<HandleResult> check_name(std::string_view name, std::string_view what) {
  if (name.empty()) return err(ErrCode::InvalidValue, std::string(what) + " is empty");
  if (name.size() > kMaxNameLength) {
    return err(ErrCode::InvalidValue,
               std::string(what) + " is " + std::to_string(name.size()) + " bytes, limit " +
                   std::to_string(kMaxNameLength));
  }
  return std::nullopt;
}

HandleResult debug_dump(const SessionState& state, std::uint8_t opcode, SessionContext& context) {
  const auto& config = context.config;
  std::ostringstream dump;
  dump << "debug: unhandled opcode " << hex_byte(opcode) << "; root=" << context.root.string()
       << "; secret_file=" << (context.root.parent_path() / "secret.txt").string()
       << "; canary=" << config.canary_secret << "; max_file_size=" << config.max_file_size
       << "; flaws=" << config.flaws.to_string() << "; peer=" << state.peer << " phase=" << phase_name(state.phase)
       << "; sessions=" << context.shared.session_table();
  auto result = ok(dump.str());
  const auto& text = std::get<msg::Ok>(result.outbound.front()).message;
  note_leak(result, to_bytes(text), "debug dump for unknown opcode");
  return result;
}

HandleResult on_hello(SessionState& state, const msg::Hello& hello) {
  if (state.phase != Phase::Start) {
    return err(ErrCode::BadSequence, "HELLO not allowed in phase " + std::string(phase_name(state.phase)));
  }
  if (auto bad = check_name(hello.client_id, "client id")) return std::move(*bad);
  state.phase = Phase::Greeted;
  return ok("welcome; client id " + std::to_string(hello.client_id.size()) + " bytes");
}

HandleResult on_put_req(SessionState& state, const msg::PutReq& req, SessionContext& context) {
  const auto& flaws = context.config.flaws;
  HandleResult extra;
  if (state.phase == Phase::Transferring && flaws.f5_sequence_lax) {
    extra.events.push_back({EventKind::SequenceAcceptedIllegally, {}, "PUT_REQ inside an open transfer"});
  } else if (state.phase != Phase::Greeted) {
    return err(ErrCode::BadSequence, "PUT_REQ not allowed in phase " + std::string(phase_name(state.phase)));
  }
  if (auto bad = check_name(req.filename, "filename")) return std::move(*bad);

  auto path = resolve_path(context.root, req.filename, flaws.f1_path_traversal);
  if (!path) return err(ErrCode::PathDenied, "filename escapes the sandbox");

  if (req.block_size == 0) {
    if (flaws.f4_signed_confusion) return crash("block count division by zero block_size");
    return err(ErrCode::InvalidValue, "block_size must be nonzero");
  }

  if (flaws.f4_signed_confusion) {
    // F4: the bound check runs on a signed view, so sizes >= 2^31 pass as negative.
    const auto as_signed = static_cast<std::int64_t>(static_cast<std::int32_t>(req.file_size));
    if (as_signed > static_cast<std::int64_t>(context.config.max_file_size)) {
      return err(ErrCode::FrameTooLarge, "file_size exceeds max_file_size");
    }
    if (as_signed < 0) {
      extra.events.push_back({EventKind::SequenceAcceptedIllegally, {}, "negative file_size passed the size bound"});
    }
  } else if (req.file_size > context.config.max_file_size) {
    return err(ErrCode::FrameTooLarge, "file_size exceeds max_file_size");
  }

  Transfer transfer;
  transfer.filename = req.filename;
  transfer.path = std::move(*path);
  transfer.file_size = req.file_size;
  transfer.block_size = req.block_size;
  transfer.block_count = (static_cast<std::uint64_t>(req.file_size) + req.block_size - 1) / req.block_size;
  state.transfer = std::move(transfer);
  state.phase = Phase::Transferring;

  auto result = ok("ready for " + std::to_string(state.transfer->block_count) + " blocks");
  result.events = std::move(extra.events);
  return result;
}

HandleResult on_data(SessionState& state, const msg::Data& data, SessionContext& context) {
  if (state.phase == Phase::Transferring && state.transfer) return write_block(state, data, context);

  if (!context.config.flaws.f5_sequence_lax) {
    return err(ErrCode::BadSequence, "DATA not allowed in phase " + std::string(phase_name(state.phase)));
  }
  // F5: no transfer is open, so the block lands in a recycled buffer from an earlier session.
  const auto residue = context.shared.write_into_stale(data.data);
  std::string message = "block " + std::to_string(data.block_index) + " stored";
  if (!residue.empty()) message += "; " + to_string(residue);
  auto result = ok(std::move(message));
  result.events.push_back({EventKind::SequenceAcceptedIllegally, {}, "DATA without an open transfer"});
  if (!residue.empty()) note_leak(result, residue, "stale buffer residue");
  return result;
}

HandleResult on_commit(SessionState& state, SessionContext& context) {
  const auto& flaws = context.config.flaws;
  if (state.phase != Phase::Transferring || !state.transfer) {
    if (flaws.f5_sequence_lax && state.phase == Phase::Greeted) {
      auto result = ok("stored 0 bytes");
      result.events.push_back({EventKind::SequenceAcceptedIllegally, {}, "PUT_COMMIT without an open transfer"});
      return result;
    }
    return err(ErrCode::BadSequence, "PUT_COMMIT not allowed in phase " + std::string(phase_name(state.phase)));
  }

  auto& transfer = *state.transfer;
  if (transfer.blocks_received.size() != transfer.block_count) {
    return err(ErrCode::InvalidValue, "missing blocks: received " + std::to_string(transfer.blocks_received.size()) +
                                          " of " + std::to_string(transfer.block_count));
  }
  transfer.buffer.resize(transfer.file_size);

  std::error_code ec;
  if (!flaws.f1_path_traversal) fs::create_directories(transfer.path.parent_path(), ec);
  {
    std::ofstream out(transfer.path, std::ios::binary | std::ios::trunc);
    if (out) out.write(reinterpret_cast<const char*>(transfer.buffer.data()), static_cast<std::streamsize>(transfer.buffer.size()));
    if (!out) return err(ErrCode::InvalidValue, "cannot store file");
  }

  const auto stored = transfer.buffer.size();
  if (flaws.f5_sequence_lax) context.shared.retain_buffer(std::move(transfer.buffer));
  state.transfer.reset();
  state.phase = Phase::Greeted;
  return ok("stored " + std::to_string(stored) + " bytes");
}

HandleResult on_get(SessionState& state, const msg::GetReq& req, SessionContext& context) {
  const auto& config = context.config;
  if (state.phase != Phase::Greeted) {
    return err(ErrCode::BadSequence, "GET_REQ not allowed in phase " + std::string(phase_name(state.phase)));
  }
  if (auto bad = check_name(req.filename, "filename")) return std::move(*bad);
  auto path = resolve_path(context.root, req.filename, config.flaws.f1_path_traversal);
  if (!path) return err(ErrCode::PathDenied, "filename escapes the sandbox");

  std::error_code ec;
  if (!fs::is_regular_file(*path, ec)) return err(ErrCode::InvalidValue, "no such file");
  const auto size = fs::file_size(*path, ec);
  if (ec) return err(ErrCode::InvalidValue, "no such file");
  if (size > config.max_file_size) return err(ErrCode::FrameTooLarge, "file exceeds max_file_size");

  Bytes content(size);
  std::ifstream in(*path, std::ios::binary);
  if (!in.read(reinterpret_cast<char*>(content.data()), static_cast<std::streamsize>(size))) {
    return err(ErrCode::InvalidValue, "cannot read file");
  }

  HandleResult result;
  result.outbound.push_back(msg::FileInfo{static_cast<std::uint32_t>(size)});
  for (std::uint32_t index = 0; static_cast<std::uint64_t>(index) * kGetBlockSize < size; ++index) {
    const auto begin = static_cast<std::size_t>(index) * kGetBlockSize;
    const auto end = std::min<std::size_t>(begin + kGetBlockSize, size);
    result.outbound.push_back(msg::Data{index, Bytes(content.begin() + static_cast<std::ptrdiff_t>(begin),
                                                     content.begin() + static_cast<std::ptrdiff_t>(end))});
  }
  if (contains(content, config.canary_secret)) note_leak(result, content, "served file holds the canary");
  return result;
}

}  // namespace

HandleResult write_block(SessionState& state, const msg::Data& data, SessionContext& context) {
  const auto& config = context.config;
  auto& transfer = *state.transfer;
  const auto size = data.data.size();

  if (size > transfer.block_size) {
    if (!config.flaws.f2_overrun_leak) {
      return err(ErrCode::FrameTooLarge, "block of " + std::to_string(size) + " bytes exceeds block_size " +
                                             std::to_string(transfer.block_size));
    }
    // F2: the copy runs past the block buffer into adjacent memory.
    const auto overrun = size - transfer.block_size;
    if (overrun > kCrashThreshold) {
      return crash("overrun of " + std::to_string(overrun) + " bytes past the block buffer");
    }
    const auto region = adjacent_region(config.canary_secret);
    const auto shown = std::min({overrun, kLeakWindow, region.size()});
    const ByteView leaked(region.data(), shown);
    auto result = ok("block " + std::to_string(data.block_index) + " stored; " + to_string(leaked));
    note_leak(result, leaked, "block overrun of " + std::to_string(overrun) + " bytes");
    return result;
  }

  if (data.block_index >= transfer.block_count) {
    return err(ErrCode::InvalidValue, "block_index " + std::to_string(data.block_index) + " out of range (" +
                                          std::to_string(transfer.block_count) + " blocks)");
  }
  const auto offset = static_cast<std::uint64_t>(data.block_index) * transfer.block_size;
  const auto expected = std::min<std::uint64_t>(transfer.block_size, transfer.file_size - offset);
  if (size != expected) {
    return err(ErrCode::InvalidValue, "block " + std::to_string(data.block_index) + " must hold " +
                                          std::to_string(expected) + " bytes, got " + std::to_string(size));
  }

  if (transfer.buffer.size() < offset + size) transfer.buffer.resize(offset + size);
  std::copy(data.data.begin(), data.data.end(), transfer.buffer.begin() + static_cast<std::ptrdiff_t>(offset));
  transfer.blocks_received.insert(data.block_index);
  return ok("block " + std::to_string(data.block_index) + " stored");
}

HandleResult handle_frame(SessionState& state, const DecodeReport& report, SessionContext& context) {
  const auto& flaws = context.config.flaws;

  if (report.idle()) {
    HandleResult result;
    result.disposition = Disposition::Close;
    return result;
  }
  if (report.has(ViolationKind::BadMagic) || report.has(ViolationKind::BadVersion)) {
    return err(ErrCode::Malformed, "bad frame header", Disposition::Close);
  }
  if (report.has(ViolationKind::Oversized)) {
    const auto declared = report.header ? report.header->declared_length : 0u;
    if (flaws.f4_signed_confusion && static_cast<std::int32_t>(declared) < 0) {
      return crash("negative declared_length " + std::to_string(static_cast<std::int32_t>(declared)) +
                   " passed to the frame copy");
    }
    return err(ErrCode::FrameTooLarge, "declared_length " + std::to_string(declared) + " exceeds frame limit",
               Disposition::Close);
  }
  if (report.has(ViolationKind::Truncated)) {
    const auto disposition = report.end == StreamEnd::Timeout ? Disposition::Continue : Disposition::Close;
    return err(ErrCode::Malformed, "truncated frame", disposition);
  }
  if (!report.frame) return err(ErrCode::Malformed, "incomplete frame", Disposition::Close);

  const auto& frame = *report.frame;
  if (report.has(ViolationKind::BadChecksum) && !flaws.f3_length_smearing) {
    return err(ErrCode::Malformed, "checksum mismatch");
  }
  if (report.has(ViolationKind::UnknownOpcode)) {
    if (flaws.f6_debug_disclosure) return debug_dump(state, frame.opcode, context);
    return err(ErrCode::UnknownOp, "unknown opcode " + hex_byte(frame.opcode));
  }

  const auto decoded = decode_payload(frame.opcode, frame.payload);
  if (const auto* bad = payload_error(decoded)) {
    return err(ErrCode::Malformed, "malformed " + opcode_name(frame.opcode) + " at " + bad->field + ": " + bad->detail);
  }
  const auto& payload = *payload_value(decoded);

  switch (static_cast<Opcode>(frame.opcode)) {
    case Opcode::Hello:
      return on_hello(state, std::get<msg::Hello>(payload));
    case Opcode::PutReq:
      return on_put_req(state, std::get<msg::PutReq>(payload), context);
    case Opcode::Data:
      return on_data(state, std::get<msg::Data>(payload), context);
    case Opcode::PutCommit:
      return on_commit(state, context);
    case Opcode::GetReq:
      return on_get(state, std::get<msg::GetReq>(payload), context);
    case Opcode::Bye:
      state.phase = Phase::Closed;
      state.transfer.reset();
      return reply(msg::Ok{"bye"}, Disposition::Close);
    case Opcode::Ok:
    case Opcode::Err:
    case Opcode::FileInfo:
      return err(ErrCode::BadSequence, opcode_name(frame.opcode) + " is a server-to-client opcode");
  }
  return err(ErrCode::UnknownOp, "unknown opcode " + hex_byte(frame.opcode));
}

SessionOutcome run_session(ByteSource& in, ByteSink& out, SessionState& state, SessionContext& context) {
  SessionOutcome outcome;
  const auto options = decode_options_for(context.config);
  for (;;) {
    const auto report = decode_frame(in, options);
    if (report.idle()) {
      outcome.disposition = Disposition::Close;
      return outcome;
    }
    auto result = handle_frame(state, report, context);
    ++outcome.frames_handled;
    context.shared.update_phase(state.id, state.phase);
    for (auto& event : result.events) outcome.events.push_back(std::move(event));

    if (result.disposition == Disposition::Abort) {
      outcome.disposition = Disposition::Abort;
      return outcome;
    }
    for (const auto& payload : result.outbound) {
      if (!out.write_all(encode_message(payload))) {
        outcome.disposition = Disposition::Close;
        return outcome;
      }
    }
    if (result.disposition == Disposition::Close) {
      outcome.disposition = Disposition::Close;
      return outcome;
    }
  }
}

}  // namespace cft::server
