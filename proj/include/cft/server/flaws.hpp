#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace cft::server {

/// Seeded vulnerabilities the reference server can exhibit.
enum class Flaw : std::uint8_t {
  F1PathTraversal = 1,
  F2OverrunLeak = 2,
  F3LengthSmearing = 3,
  F4SignedConfusion = 4,
  F5SequenceLax = 5,
  F6DebugDisclosure = 6,
};

inline constexpr std::array<Flaw, 6> kAllFlaws{Flaw::F1PathTraversal, Flaw::F2OverrunLeak,     Flaw::F3LengthSmearing,
                                              Flaw::F4SignedConfusion, Flaw::F5SequenceLax, Flaw::F6DebugDisclosure};

/// "F1" .. "F6"
std::string flaw_id(Flaw flaw);
std::string_view flaw_description(Flaw flaw);

struct FlawSet {
  bool f1_path_traversal = false;
  bool f2_overrun_leak = false;
  bool f3_length_smearing = false;
  bool f4_signed_confusion = false;
  bool f5_sequence_lax = false;
  bool f6_debug_disclosure = false;

  static FlawSet vulnerable() { return {true, true, true, true, true, true}; }
  static FlawSet hardened() { return {}; }
  static FlawSet only(Flaw flaw) {
    FlawSet set;
    set.set(flaw, true);
    return set;
  }

  bool has(Flaw flaw) const;
  void set(Flaw flaw, bool on);
  bool none() const { return *this == hardened(); }
  bool all() const { return *this == vulnerable(); }

  /// "all", "none", or a comma list such as "F1,F4".
  std::string to_string() const;

  bool operator==(const FlawSet&) const = default;
};

/// Accepts "all", "none", or a comma separated list of F1..F6 (case-insensitive,
/// surrounding blanks ignored). Throws std::invalid_argument otherwise.
FlawSet parse_flaws(std::string_view text);

/// What an attacker can observe when a flaw is triggered.
enum class FlawEffect : std::uint8_t {
  LeaksCanary = 1 << 0,
  CrashesSession = 1 << 1,
  AcceptsIllegally = 1 << 2,
  SmearsFrames = 1 << 3,
  EchoesResidue = 1 << 4,
};

/// The flaw table: every observable effect each flaw can produce.
bool flaw_can_produce(Flaw flaw, FlawEffect effect);

}  // namespace cft::server
