#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "cft/harness/attack_case.hpp"
#include "cft/server/config.hpp"

namespace cft::harness {

/// What the suite knows about the server it will attack.
struct CaseContext {
  std::optional<std::filesystem::path> sandbox_root;
  std::uint64_t max_file_size = server::kDefaultMaxFileSize;
};

std::vector<AttackCase> builtin_cases(const CaseContext& context = {});

/// nullopt when no builtin case has this id.
std::optional<AttackCase> find_case(std::string_view id, const CaseContext& context = {});

/// Content used by the stale-residue case; it repeats the marker so any residue window shows it.
inline constexpr std::string_view kStaleMarker = "STALE-MARKER-5e1d";

}  // namespace cft::harness
