#include "cft/server/flaws.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace cft::server {

std::string flaw_id(Flaw flaw) { return "F" + std::to_string(static_cast<int>(flaw)); }

std::string_view flaw_description(Flaw flaw) {
  switch (flaw) {
    case Flaw::F1PathTraversal: return "path traversal: filenames joined to the root without containment checks";
    case Flaw::F2OverrunLeak: return "block overrun: oversized DATA leaks adjacent memory or crashes the session";
    case Flaw::F3LengthSmearing: return "length smearing: declared lengths trusted, no read timeout, no checksum check";
    case Flaw::F4SignedConfusion: return "signed confusion: sizes read as signed 32-bit, zero block size faults";
    case Flaw::F5SequenceLax: return "lax sequencing: out-of-order transfer frames accepted into stale buffers";
    case Flaw::F6DebugDisclosure: return "debug disclosure: unknown opcodes answered with an internal state dump";
  }
  return "?";
}

bool FlawSet::has(Flaw flaw) const {
  switch (flaw) {
    case Flaw::F1PathTraversal: return f1_path_traversal;
    case Flaw::F2OverrunLeak: return f2_overrun_leak;
    case Flaw::F3LengthSmearing: return f3_length_smearing;
    case Flaw::F4SignedConfusion: return f4_signed_confusion;
    case Flaw::F5SequenceLax: return f5_sequence_lax;
    case Flaw::F6DebugDisclosure: return f6_debug_disclosure;
  }
  return false;
}

void FlawSet::set(Flaw flaw, bool on) {
  switch (flaw) {
    case Flaw::F1PathTraversal: f1_path_traversal = on; break;
    case Flaw::F2OverrunLeak: f2_overrun_leak = on; break;
    case Flaw::F3LengthSmearing: f3_length_smearing = on; break;
    case Flaw::F4SignedConfusion: f4_signed_confusion = on; break;
    case Flaw::F5SequenceLax: f5_sequence_lax = on; break;
    case Flaw::F6DebugDisclosure: f6_debug_disclosure = on; break;
  }
}

std::string FlawSet::to_string() const {
  if (all()) return "all";
  if (none()) return "none";
  std::string out;
  for (auto flaw : kAllFlaws) {
    if (!has(flaw)) continue;
    if (!out.empty()) out += ",";
    out += flaw_id(flaw);
  }
  return out;
}

FlawSet parse_flaws(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
  };

  const auto whole = lower(trim(text));
  if (whole == "all") return FlawSet::vulnerable();
  if (whole == "none") return FlawSet::hardened();
  if (whole.empty()) throw std::invalid_argument("empty flaw list");

  FlawSet set;
  std::string_view rest = whole;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (item.size() != 2 || item[0] != 'f' || item[1] < '1' || item[1] > '6') {
      throw std::invalid_argument("unknown flaw '" + std::string(item) + "' (expected all, none, or F1..F6)");
    }
    set.set(static_cast<Flaw>(item[1] - '0'), true);
  }
  return set;
}

bool flaw_can_produce(Flaw flaw, FlawEffect effect) {
  switch (flaw) {
    case Flaw::F1PathTraversal:
      return effect == FlawEffect::LeaksCanary || effect == FlawEffect::AcceptsIllegally;
    case Flaw::F2OverrunLeak:
      return effect == FlawEffect::LeaksCanary || effect == FlawEffect::CrashesSession;
    case Flaw::F3LengthSmearing:
      return effect == FlawEffect::SmearsFrames;
    case Flaw::F4SignedConfusion:
      return effect == FlawEffect::AcceptsIllegally || effect == FlawEffect::CrashesSession;
    case Flaw::F5SequenceLax:
      return effect == FlawEffect::AcceptsIllegally || effect == FlawEffect::EchoesResidue;
    case Flaw::F6DebugDisclosure:
      return effect == FlawEffect::LeaksCanary || effect == FlawEffect::AcceptsIllegally;
  }
  return false;
}

}  // namespace cft::server
