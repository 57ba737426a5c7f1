#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cft {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline Bytes to_bytes(std::string_view text) { return Bytes(text.begin(), text.end()); }

inline std::string to_string(ByteView bytes) { return std::string(bytes.begin(), bytes.end()); }

/// Lowercase hex with no separators, e.g. "46540101".
std::string to_hex(ByteView bytes);

/// Space separated hex ("46 54 01"), truncated to `limit` bytes with a length suffix.
std::string hex_dump(ByteView bytes, std::size_t limit = SIZE_MAX);

/// Parses contiguous hex; returns false on odd length or a non-hex digit.
bool from_hex(std::string_view hex, Bytes& out);

bool is_valid_utf8(ByteView bytes);

// Big-endian writers and readers. Readers assume the caller checked bounds.
void put_u16(Bytes& out, std::uint16_t v);
void put_u32(Bytes& out, std::uint32_t v);
std::uint16_t get_u16(ByteView in, std::size_t at);
std::uint32_t get_u32(ByteView in, std::size_t at);

}  // namespace cft
