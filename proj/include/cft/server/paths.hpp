#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

namespace cft::server {

/// Maps a client filename onto the sandbox.
///
/// With `naive_join` (flaw F1) the name is joined to the root and lexically normalized with
/// no containment check, so ".." segments and absolute names escape. Otherwise absolute
/// names, ".." segments, NUL bytes, and names whose canonical location is not strictly
/// inside `root` are refused (nullopt).
std::optional<std::filesystem::path> resolve_path(const std::filesystem::path& root, std::string_view filename,
                                                  bool naive_join);

/// True when `path` is `root` or lies below it (both taken as canonical).
bool is_within(const std::filesystem::path& root, const std::filesystem::path& path);

}  // namespace cft::server
