#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lol/toymodel/corpus.hpp"

namespace lol::eval {

enum class ChoiceLabel { best, correct, incorrect };

std::string_view to_string(ChoiceLabel label);
ChoiceLabel parse_label(std::string_view text);

struct McChoice {
  std::string text;
  ChoiceLabel label = ChoiceLabel::incorrect;
};

// Multiple-choice item. Exactly one best choice; the best choice also
// counts as correct.
struct McItem {
  std::string id;
  std::string question;
  std::vector<McChoice> choices;

  void validate() const;
  std::vector<ChoiceLabel> labels() const;
};

struct CompletionItem {
  std::string id;
  std::string prefix;
  std::vector<std::string> completions;
  std::size_t correct_index = 0;

  void validate() const;
};

// JSON-lines {id, question, choices:[{text,label}]}
std::vector<McItem> load_mc_dataset(const std::filesystem::path& path);
std::string serialize_mc_dataset(const std::vector<McItem>& items);

// JSON-lines {id, prefix, completions:[...], correct_index}
std::vector<CompletionItem> load_completion_dataset(const std::filesystem::path& path);
std::string serialize_completion_dataset(const std::vector<CompletionItem>& items);

// One item per held-out fact: best = true object, correct = the object
// followed by the sentence terminator, incorrect = two other objects seen
// with the same relation.
std::vector<McItem> build_synthetic_mc(const toymodel::FactCorpus& corpus, std::uint64_t seed);

// One item per held-out fact: the true sentence ending and two wrong ones,
// in seeded order.
std::vector<CompletionItem> build_synthetic_completion(const toymodel::FactCorpus& corpus,
                                                       std::uint64_t seed);

}  // namespace lol::eval
