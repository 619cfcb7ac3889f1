#include "lol/engine/session.hpp"

#include <algorithm>
#include <charconv>

#include "lol/error.hpp"

namespace lol::engine {

namespace {

constexpr std::size_t kMaxCacheEntries = 1u << 15;

// Instruction text as whitespace-separated token ids, for providers that
// carry no vocabulary.
TokenSequence numeric_instruction(std::string_view text) {
  TokenSequence out;
  for (const auto& w : split_words(text)) {
    TokenId id = 0;
    auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), id);
    if (ec != std::errc() || p != w.data() + w.size()) {
      throw ValidationError("instruction word '" + w +
                            "' is not a token id and the session has no vocabulary");
    }
    out.push_back(id);
  }
  return out;
}

}  // namespace

ContrastSession::ContrastSession(providers::ProviderPtr base, providers::ProviderPtr amateur,
                                 InstructionEncoder encoder)
    : base_(std::move(base)), amateur_(std::move(amateur)), encoder_(std::move(encoder)) {
  if (!base_) throw ConfigurationError("session needs a base provider");
  if (amateur_ && amateur_->vocab_size() != base_->vocab_size()) {
    throw ConfigurationError("base and amateur vocab sizes differ (" +
                             std::to_string(base_->vocab_size()) + " vs " +
                             std::to_string(amateur_->vocab_size()) + ")");
  }
  if (!encoder_) encoder_ = numeric_instruction;
}

std::size_t ContrastSession::max_context() const noexcept {
  std::size_t limit = base_->info().max_context;
  if (amateur_) {
    const std::size_t a = amateur_->info().max_context;
    if (a != 0 && (limit == 0 || a < limit)) limit = a;
  }
  return limit;
}

const LayeredLogits& ContrastSession::query(Role role, const TokenSequence& prefix,
                                            std::vector<LayerIndex> layers) {
  std::sort(layers.begin(), layers.end());
  layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
  const providers::LogitProvider* provider = role == Role::base ? base_.get() : amateur_.get();
  if (!provider) throw ConfigurationError("this preset needs an amateur provider");

  Key key{role, prefix, layers};
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  if (cache_.size() >= kMaxCacheEntries) cache_.clear();
  ++calls_;
  auto logits = provider->query(prefix, layers);
  for (LayerIndex l : layers) {
    const auto& row = logits.at(l);
    if (row.size() != static_cast<std::size_t>(vocab_size())) {
      throw Error(ErrorKind::runtime, "provider " + provider->identity() +
                                          " returned a score vector of the wrong length");
    }
  }
  return cache_.emplace(std::move(key), std::move(logits)).first->second;
}

TokenSequence ContrastSession::encode_instruction(std::string_view text) const {
  return encoder_(text);
}

}  // namespace lol::engine
