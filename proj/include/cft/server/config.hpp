#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "cft/byte_stream.hpp"
#include "cft/net.hpp"
#include "cft/server/flaws.hpp"

namespace cft::server {

inline constexpr std::string_view kDefaultCanary = "CFT-CANARY-7f3a9d";
inline constexpr std::uint64_t kDefaultMaxFileSize = 16ull * 1024 * 1024;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServerConfig {
  net::Endpoint listen{"127.0.0.1", 0};
  std::filesystem::path sandbox_root;
  FlawSet flaws;
  std::string canary_secret{kDefaultCanary};
  std::uint64_t max_file_size = kDefaultMaxFileSize;
  Millis read_timeout{2000};
};

/// Throws ConfigError unless sandbox_root is an existing directory and the canary is nonempty.
void validate(const ServerConfig& config);

/// Parses `key = value` lines (listen, root, flaws, canary, max_file_size, timeout_ms).
/// Blank lines and `#` comments are ignored. Unset keys keep the values in `base`.
ServerConfig parse_config_text(std::string_view text, ServerConfig base = {});

ServerConfig load_config_file(const std::filesystem::path& path, ServerConfig base = {});

}  // namespace cft::server
