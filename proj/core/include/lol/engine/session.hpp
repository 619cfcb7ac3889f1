#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string_view>
#include <tuple>
#include <vector>

#include "lol/providers/provider.hpp"

namespace lol::engine {

using InstructionEncoder = std::function<TokenSequence(std::string_view)>;

enum class Role { base, amateur };

// Base and (optional) amateur providers plus per-session state: a memo of
// provider answers so teacher-forced scoring does not re-run shared
// prefixes. Single-owner; run one session per thread.
class ContrastSession {
 public:
  ContrastSession(providers::ProviderPtr base, providers::ProviderPtr amateur,
                  InstructionEncoder encoder = {});

  const providers::LogitProvider& base() const noexcept { return *base_; }
  const providers::LogitProvider* amateur() const noexcept { return amateur_.get(); }
  bool has_amateur() const noexcept { return amateur_ != nullptr; }

  int vocab_size() const noexcept { return base_->vocab_size(); }
  int n_layers() const noexcept { return base_->n_layers(); }
  // Smallest bounded context among the providers; 0 if all unbounded.
  std::size_t max_context() const noexcept;

  const LayeredLogits& query(Role role, const TokenSequence& prefix, std::vector<LayerIndex> layers);

  TokenSequence encode_instruction(std::string_view text) const;

  std::size_t provider_calls() const noexcept { return calls_; }
  void clear_cache() { cache_.clear(); }

 private:
  using Key = std::tuple<Role, TokenSequence, std::vector<LayerIndex>>;

  providers::ProviderPtr base_;
  providers::ProviderPtr amateur_;
  InstructionEncoder encoder_;
  std::map<Key, LayeredLogits> cache_;
  std::size_t calls_ = 0;
};

}  // namespace lol::engine
