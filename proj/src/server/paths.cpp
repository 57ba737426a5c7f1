#include "cft/server/paths.hpp"

namespace cft::server {

namespace fs = std::filesystem;

bool is_within(const fs::path& root, const fs::path& path) {
  auto r = root.begin();
  auto p = path.begin();
  for (; r != root.end(); ++r, ++p) {
    if (r->empty()) continue;  // trailing separator
    if (p == path.end() || *r != *p) return false;
  }
  return true;
}

std::optional<fs::path> resolve_path(const fs::path& root, std::string_view filename, bool naive_join) {
  if (naive_join) return (root / fs::path(filename)).lexically_normal();

  if (filename.empty() || filename.find('\0') != std::string_view::npos) return std::nullopt;
  const fs::path name(filename);
  if (name.is_absolute() || name.has_root_name() || name.has_root_directory()) return std::nullopt;
  for (const auto& part : name) {
    if (part == "..") return std::nullopt;
  }

  std::error_code ec;
  const auto base = fs::weakly_canonical(root, ec);
  if (ec) return std::nullopt;
  const auto candidate = fs::weakly_canonical(base / name, ec);
  if (ec) return std::nullopt;
  if (candidate == base || !is_within(base, candidate)) return std::nullopt;
  return candidate;
}

}  // namespace cft::server
