#include "cft/server/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace cft::server {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_number(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(value) + "'");
  }
  return out;
}

}  // namespace

void validate(const ServerConfig& config) {
  std::error_code ec;
  if (config.sandbox_root.empty()) throw ConfigError("sandbox root is not set");
  if (!std::filesystem::is_directory(config.sandbox_root, ec)) {
    throw ConfigError("sandbox root " + config.sandbox_root.string() + " is not a directory");
  }
  if (config.canary_secret.empty()) throw ConfigError("canary secret must be nonempty");
  if (config.read_timeout.count() <= 0) throw ConfigError("read timeout must be positive");
}

ServerConfig parse_config_text(std::string_view text, ServerConfig base) {
  ServerConfig config = std::move(base);
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      if (key == "listen") {
        config.listen = net::parse_endpoint(value);
      } else if (key == "root") {
        config.sandbox_root = std::string(value);
      } else if (key == "flaws") {
        config.flaws = parse_flaws(value);
      } else if (key == "canary") {
        config.canary_secret = std::string(value);
      } else if (key == "max_file_size") {
        config.max_file_size = parse_number(key, value);
      } else if (key == "timeout_ms") {
        config.read_timeout = Millis(parse_number(key, value));
      } else {
        throw ConfigError("unknown key '" + std::string(key) + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

ServerConfig load_config_file(const std::filesystem::path& path, ServerConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str(), std::move(base));
}

}  // namespace cft::server
