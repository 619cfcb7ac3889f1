#include "lol/toymodel/vocabulary.hpp"

#include <algorithm>
#include <set>

#include "lol/error.hpp"

namespace lol::toymodel {

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  if (words_.size() < 2 || words_[kBos] != kBosWord || words_[kEnd] != kEndWord) {
    throw ValidationError("vocabulary must start with the reserved words <bos> and .");
  }
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i].empty()) throw ValidationError("vocabulary contains an empty word");
    auto [it, inserted] = index_.emplace(words_[i], static_cast<TokenId>(i));
    if (!inserted) throw ValidationError("duplicate vocabulary word: " + words_[i]);
  }
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words,
                                  const std::vector<std::string>& extra) {
  std::vector<std::string> out{std::string(kBosWord), std::string(kEndWord)};
  std::set<std::string> seen(out.begin(), out.end());
  for (const auto& w : extra) {
    if (seen.insert(w).second) out.push_back(w);
  }
  std::vector<std::string> sorted = words;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& w : sorted) {
    if (seen.insert(w).second) out.push_back(w);
  }
  return Vocabulary(std::move(out));
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id >= words_.size()) {
    throw ValidationError("token id " + std::to_string(id) + " out of vocabulary range");
  }
  return words_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenSequence Vocabulary::encode(std::string_view text) const {
  TokenSequence out;
  for (const auto& w : split_words(text)) {
    auto id = find(w);
    if (!id) throw ValidationError("word not in vocabulary: '" + w + "'");
    out.push_back(*id);
  }
  return out;
}

std::string Vocabulary::decode(const TokenSequence& tokens) const {
  std::vector<std::string> words;
  words.reserve(tokens.size());
  for (TokenId t : tokens) words.push_back(word(t));
  return join_words(words);
}

}  // namespace lol::toymodel
