#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace lol {

// Writes `bytes` to `path` through a sibling temp file and a rename, so
// readers never observe a half-written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace lol
