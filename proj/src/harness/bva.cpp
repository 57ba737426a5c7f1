#include "cft/harness/bva.hpp"

#include <algorithm>
#include <stdexcept>

namespace cft::harness {

std::vector<std::uint64_t> bva_values(const NumericField& field) {
  if (field.width != 16 && field.width != 32) throw std::invalid_argument("field width must be 16 or 32");
  const std::uint64_t top = (std::uint64_t{1} << field.width) - 1;
  if (field.min > field.nominal || field.nominal > field.max || field.max > top) {
    throw std::invalid_argument("expected min <= nominal <= max within the field width");
  }
  const std::uint64_t half = std::uint64_t{1} << (field.width - 1);

  std::vector<std::uint64_t> out{field.min, field.nominal, field.max, 0, half - 1, half, top};
  if (field.min > 0) out.push_back(field.min - 1);
  if (field.min < top) out.push_back(field.min + 1);
  if (field.max > 0) out.push_back(field.max - 1);
  if (field.max < top) out.push_back(field.max + 1);

  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace cft::harness
