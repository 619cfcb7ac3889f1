#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lol {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

// Layers are 1-based: layer k is the residual stream after block k.
using LayerIndex = int;

// Raw (pre-softmax) score vectors keyed by layer, all taken at the last
// position of one prefix.
using LayeredLogits = std::map<LayerIndex, std::vector<double>>;

// Default factuality instruction placed in front of the context by the
// truthfulness-refocus stage. Toy corpora include these words in their
// vocabulary so the instruction is always encodable.
inline constexpr std::string_view kDefaultInstruction =
    "answer truthfully with the correct fact :";

std::vector<std::string> split_words(std::string_view text);
std::string join_words(const std::vector<std::string>& words);

// 64-bit FNV-1a, used for checkpoint checksums and config fingerprints.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

}  // namespace lol
