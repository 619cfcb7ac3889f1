#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lol/common.hpp"

namespace lol::toymodel {

// Closed whitespace-token vocabulary. Ids 0 and 1 are reserved for the
// sequence-start marker and the sentence terminator.
class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEnd = 1;
  static constexpr std::string_view kBosWord = "<bos>";
  static constexpr std::string_view kEndWord = ".";

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words);

  // Specials first, then `extra` words in order, then `words` sorted.
  static Vocabulary from_words(const std::vector<std::string>& words,
                               const std::vector<std::string>& extra = {});

  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::string& word(TokenId id) const;
  std::optional<TokenId> find(std::string_view word) const;
  bool contains(std::string_view word) const { return find(word).has_value(); }

  // Throws ValidationError naming the first unknown word.
  TokenSequence encode(std::string_view text) const;
  std::string decode(const TokenSequence& tokens) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace lol::toymodel
