#include "lol/common.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lol/atomic_file.hpp"
#include "lol/error.hpp"

namespace lol {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) words.emplace_back(text.substr(start, i - start));
  }
  return words;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::io: return "io";
    case ErrorKind::ingestion: return "ingestion";
    case ErrorKind::prefix_not_found: return "prefix_not_found";
    case ErrorKind::layer_not_dumped: return "layer_not_dumped";
    case ErrorKind::context_overflow: return "context_overflow";
    case ErrorKind::training_diverged: return "training_diverged";
    case ErrorKind::runtime: return "runtime";
  }
  return "runtime";
}

std::string format_tokens(const TokenSequence& tokens) {
  std::string out = "[";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(tokens[i]);
  }
  return out + "]";
}

PrefixNotFoundError::PrefixNotFoundError(TokenSequence prefix)
    : Error(ErrorKind::prefix_not_found, "prefix not found in replay archive: " + format_tokens(prefix)),
      prefix_(std::move(prefix)) {}

LayerNotDumpedError::LayerNotDumpedError(LayerIndex layer)
    : Error(ErrorKind::layer_not_dumped, "layer " + std::to_string(layer) + " was not dumped"),
      layer_(layer) {}

ContextOverflowError::ContextOverflowError(std::size_t length, std::size_t limit)
    : Error(ErrorKind::context_overflow, "context of " + std::to_string(length) +
                                             " tokens exceeds limit " + std::to_string(limit)) {}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace lol
