#pragma once

#include <cstdint>
#include <vector>

namespace cft::harness {

struct NumericField {
  unsigned width = 32;  // 16 or 32
  std::uint64_t min = 0;
  std::uint64_t max = 0;
  std::uint64_t nominal = 0;
};

/// Boundary values for an unsigned wire field, ascending and deduplicated:
/// min-1, min, min+1, nominal, max-1, max, max+1 (whichever are encodable), plus
/// 0, 2^(w-1)-1, 2^(w-1) and 2^w-1. Values at or above 2^(w-1) read as negative
/// under a signed interpretation.
/// Throws std::invalid_argument for other widths or when min <= nominal <= max fails.
std::vector<std::uint64_t> bva_values(const NumericField& field);

}  // namespace cft::harness
