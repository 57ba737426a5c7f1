#include "cft/trace/trace.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "cft/payload.hpp"

namespace cft::trace {

namespace fs = std::filesystem;

std::string_view direction_tag(Direction direction) {
  return direction == Direction::ClientToServer ? "C2S" : "S2C";
}

std::string format_record(const TraceRecord& record) {
  return std::to_string(record.timestamp_ms) + " " + std::string(direction_tag(record.direction)) + " " +
         to_hex(record.bytes);
}

FileTraceSink::FileTraceSink(const fs::path& path)
    : path_(path), out_(path, std::ios::out | std::ios::trunc), start_(std::chrono::steady_clock::now()) {
  if (!out_) throw TraceError("cannot open trace file " + path.string());
}

void FileTraceSink::record(Direction direction, ByteView bytes) {
  if (bytes.empty()) return;
  std::lock_guard lock(mutex_);
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_);
  last_ms_ = std::max<std::uint64_t>(last_ms_, static_cast<std::uint64_t>(elapsed.count()));
  out_ << format_record(TraceRecord{last_ms_, direction, Bytes(bytes.begin(), bytes.end())}) << '\n';
  out_.flush();
  if (!out_) throw TraceError("write to trace file " + path_.string() + " failed");
}

MemoryTraceSink::MemoryTraceSink() : start_(std::chrono::steady_clock::now()) {}

void MemoryTraceSink::record(Direction direction, ByteView bytes) {
  if (bytes.empty()) return;
  std::lock_guard lock(mutex_);
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_);
  auto ms = static_cast<std::uint64_t>(elapsed.count());
  if (!records_.empty()) ms = std::max(ms, records_.back().timestamp_ms);
  records_.push_back(TraceRecord{ms, direction, Bytes(bytes.begin(), bytes.end())});
}

std::vector<TraceRecord> MemoryTraceSink::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

Bytes MemoryTraceSink::stream(Direction direction) const {
  std::lock_guard lock(mutex_);
  Bytes out;
  for (const auto& r : records_) {
    if (r.direction == direction) out.insert(out.end(), r.bytes.begin(), r.bytes.end());
  }
  return out;
}

LoadedTrace parse_trace(std::string_view text) {
  LoadedTrace trace;
  std::size_t line_number = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    auto corrupt = [&](std::string reason) {
      trace.corrupt.push_back(CorruptLine{line_number, std::string(line), std::move(reason)});
    };

    const auto sp1 = line.find(' ');
    const auto sp2 = sp1 == std::string_view::npos ? sp1 : line.find(' ', sp1 + 1);
    if (sp2 == std::string_view::npos) {
      corrupt("expected '<timestamp_ms> <C2S|S2C> <hex>'");
      continue;
    }
    TraceRecord record;
    const auto ts = line.substr(0, sp1);
    auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), record.timestamp_ms);
    if (ec != std::errc{} || ptr != ts.data() + ts.size()) {
      corrupt("bad timestamp");
      continue;
    }
    const auto tag = line.substr(sp1 + 1, sp2 - sp1 - 1);
    if (tag == "C2S") {
      record.direction = Direction::ClientToServer;
    } else if (tag == "S2C") {
      record.direction = Direction::ServerToClient;
    } else {
      corrupt("bad direction '" + std::string(tag) + "'");
      continue;
    }
    if (!from_hex(line.substr(sp2 + 1), record.bytes) || record.bytes.empty()) {
      corrupt("bad hex payload");
      continue;
    }
    if (!trace.records.empty() && record.timestamp_ms < trace.records.back().timestamp_ms) {
      corrupt("timestamp goes backwards");
      continue;
    }
    trace.records.push_back(std::move(record));
  }
  return trace;
}

LoadedTrace load_trace(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot read trace file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_trace(text.str());
}

Bytes direction_stream(const LoadedTrace& trace, Direction direction) {
  Bytes out;
  for (const auto& r : trace.records) {
    if (r.direction == direction) out.insert(out.end(), r.bytes.begin(), r.bytes.end());
  }
  return out;
}

std::size_t TraceListing::frame_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return std::holds_alternative<FrameEntry>(e); }));
}

std::size_t TraceListing::violation_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) {
    if (const auto* f = std::get_if<FrameEntry>(&e)) n += f->violations.size();
  }
  return n;
}

bool TraceListing::has_violation(ViolationKind kind) const {
  for (const auto& e : entries) {
    if (const auto* f = std::get_if<FrameEntry>(&e)) {
      for (const auto& v : f->violations) {
        if (v.kind == kind) return true;
      }
    }
  }
  return false;
}

std::size_t TraceListing::residue_bytes() const {
  std::size_t n = 0;
  for (const auto& e : entries) {
    if (const auto* r = std::get_if<ResidueEntry>(&e)) n += r->bytes.size();
  }
  return n;
}

namespace {

struct DirectionStream {
  Bytes bytes;
  std::vector<std::pair<std::size_t, std::uint64_t>> starts;  // offset -> record timestamp

  std::uint64_t timestamp_at(std::size_t offset) const {
    std::uint64_t ts = 0;
    for (const auto& [start, when] : starts) {
      if (start > offset) break;
      ts = when;
    }
    return ts;
  }
};

bool magic_at(const Bytes& s, std::size_t pos) {
  return pos + 2 <= s.size() && s[pos] == kMagic[0] && s[pos + 1] == kMagic[1];
}

bool frame_start_at(const Bytes& s, std::size_t pos) { return magic_at(s, pos) && pos + 2 < s.size() && s[pos + 2] == kVersion; }

std::size_t next_frame_start(const Bytes& s, std::size_t from) {
  for (std::size_t p = from; p < s.size(); ++p) {
    if (frame_start_at(s, p)) return p;
  }
  return s.size();
}

// Smallest payload length whose checksum verifies and after which a new frame (or the
// end of the stream) begins.
std::optional<std::uint32_t> infer_actual_length(const Bytes& s, std::size_t pos) {
  if (pos + kFrameOverhead > s.size()) return std::nullopt;
  std::uint8_t sum = 0;
  for (std::size_t len = 0; pos + kHeaderSize + len < s.size(); ++len) {
    const auto check_at = pos + kHeaderSize + len;
    const auto end = check_at + 1;
    if (s[check_at] == sum && (end == s.size() || frame_start_at(s, end))) return static_cast<std::uint32_t>(len);
    sum ^= s[check_at];
  }
  return std::nullopt;
}

std::string payload_summary(const Frame& frame) {
  if (!is_known_opcode(frame.opcode)) {
    return "payload " + std::to_string(frame.payload.size()) + " bytes [" + hex_dump(frame.payload, 24) + "]";
  }
  const auto decoded = decode_payload(frame.opcode, frame.payload);
  if (const auto* bad = payload_error(decoded)) {
    return "payload malformed at " + bad->field + " (" + bad->detail + ") [" + hex_dump(frame.payload, 24) + "]";
  }
  return summarize(*payload_value(decoded));
}

void review_direction(const DirectionStream& stream, Direction direction, std::vector<ListingEntry>& out) {
  const auto& s = stream.bytes;
  std::size_t pos = 0;
  while (pos < s.size()) {
    if (!magic_at(s, pos)) {
      const auto next = next_frame_start(s, pos + 1);
      out.emplace_back(ResidueEntry{direction, stream.timestamp_at(pos), pos,
                                    Bytes(s.begin() + static_cast<std::ptrdiff_t>(pos),
                                          s.begin() + static_cast<std::ptrdiff_t>(next))});
      pos = next;
      continue;
    }

    const auto report = decode_frame(ByteView(s).subspan(pos));
    FrameEntry entry;
    entry.direction = direction;
    entry.timestamp_ms = stream.timestamp_at(pos);
    entry.offset = pos;
    entry.violations = report.violations;
    if (report.header) {
      entry.opcode = report.header->opcode;
      entry.declared_length = report.header->declared_length;
    }

    std::size_t end = s.size();
    bool consistent = false;
    if (report.frame) {
      entry.checksum_ok = !report.has(ViolationKind::BadChecksum);
      end = pos + kFrameOverhead + report.frame->declared_length;
      consistent = entry.checksum_ok && (end == s.size() || frame_start_at(s, end));
      entry.summary = payload_summary(*report.frame);
    } else {
      entry.summary = "incomplete frame, " + std::to_string(s.size() - pos) + " bytes available";
    }

    entry.actual_length = consistent ? std::optional(entry.declared_length) : infer_actual_length(s, pos);
    if (entry.actual_length && *entry.actual_length != entry.declared_length) {
      entry.violations.push_back({ViolationKind::LengthMismatch, "declared " + std::to_string(entry.declared_length) +
                                                                     ", actual " + std::to_string(*entry.actual_length)});
    }
    out.emplace_back(std::move(entry));
    pos = end;
  }
}

}  // namespace

TraceListing review(const LoadedTrace& trace) {
  DirectionStream c2s;
  DirectionStream s2c;
  for (const auto& r : trace.records) {
    auto& target = r.direction == Direction::ClientToServer ? c2s : s2c;
    target.starts.emplace_back(target.bytes.size(), r.timestamp_ms);
    target.bytes.insert(target.bytes.end(), r.bytes.begin(), r.bytes.end());
  }

  TraceListing listing;
  for (const auto& line : trace.corrupt) listing.entries.emplace_back(CorruptEntry{line});

  std::vector<ListingEntry> frames;
  review_direction(c2s, Direction::ClientToServer, frames);
  review_direction(s2c, Direction::ServerToClient, frames);
  auto when = [](const ListingEntry& e) -> std::uint64_t {
    if (const auto* f = std::get_if<FrameEntry>(&e)) return f->timestamp_ms;
    if (const auto* r = std::get_if<ResidueEntry>(&e)) return r->timestamp_ms;
    return 0;
  };
  std::stable_sort(frames.begin(), frames.end(), [&](const auto& a, const auto& b) { return when(a) < when(b); });
  for (auto& e : frames) listing.entries.push_back(std::move(e));
  return listing;
}

std::string render(const TraceListing& listing) {
  std::ostringstream out;
  for (const auto& entry : listing.entries) {
    if (const auto* c = std::get_if<CorruptEntry>(&entry)) {
      out << "corrupt line " << c->line.line_number << ": " << c->line.reason << "\n";
    } else if (const auto* r = std::get_if<ResidueEntry>(&entry)) {
      out << direction_tag(r->direction) << " @" << r->timestamp_ms << "ms +" << r->offset << " RESIDUE "
          << r->bytes.size() << " bytes: " << hex_dump(r->bytes, 64) << "\n";
    } else {
      const auto& f = std::get<FrameEntry>(entry);
      out << direction_tag(f.direction) << " @" << f.timestamp_ms << "ms +" << f.offset << " " << opcode_name(f.opcode)
          << " declared=" << f.declared_length << " actual=";
      if (f.actual_length) {
        out << *f.actual_length;
      } else {
        out << "?";
      }
      out << " checksum=" << (f.checksum_ok ? "ok" : "bad");
      if (!f.violations.empty()) {
        out << " violations=[";
        for (std::size_t i = 0; i < f.violations.size(); ++i) {
          if (i != 0) out << "; ";
          out << violation_name(f.violations[i].kind) << ": " << f.violations[i].detail;
        }
        out << "]";
      }
      out << " | " << f.summary << "\n";
    }
  }
  return out.str();
}

}  // namespace cft::trace
