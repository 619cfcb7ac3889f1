#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>

#include "lol/common.hpp"

namespace lol::providers {

struct ProviderInfo {
  std::string identity;
  int vocab_size = 0;
  int n_layers = 0;
  // False for replay providers, which only answer prefixes they hold.
  bool arbitrary_prefixes = false;
  // Longest prefix the provider accepts; 0 means unbounded.
  std::size_t max_context = 0;
};

// Source of layered raw scores for the contrastive engine. Implementations
// are immutable after construction; query is pure and thread-safe.
class LogitProvider {
 public:
  virtual ~LogitProvider() = default;

  virtual const ProviderInfo& info() const noexcept = 0;

  // Raw scores at the last position of `prefix` for every requested layer.
  virtual LayeredLogits query(const TokenSequence& prefix,
                              std::span<const LayerIndex> layers) const = 0;

  const std::string& identity() const noexcept { return info().identity; }
  int vocab_size() const noexcept { return info().vocab_size; }
  int n_layers() const noexcept { return info().n_layers; }
};

using ProviderPtr = std::shared_ptr<const LogitProvider>;

// Throws ValidationError unless every layer is in [1, n_layers] and the
// set is non-empty.
void validate_layers(const ProviderInfo& info, std::span<const LayerIndex> layers);

}  // namespace lol::providers
