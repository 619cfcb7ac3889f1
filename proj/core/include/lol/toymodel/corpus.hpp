#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lol/common.hpp"
#include "lol/toymodel/vocabulary.hpp"

namespace lol::toymodel {

enum class Split { train, held_out };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

// One (subject, relation, object) fact. Each field is one or more
// whitespace-separated vocabulary words.
struct FactRecord {
  std::string subject;
  std::string relation;
  std::string object;
  Split split = Split::train;

  friend bool operator==(const FactRecord&, const FactRecord&) = default;
};

struct FactCorpus {
  std::vector<FactRecord> records;

  std::vector<FactRecord> select(Split split) const;
  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  // Sorted distinct words across all fields.
  std::vector<std::string> words() const;

  friend bool operator==(const FactCorpus&, const FactCorpus&) = default;
};

// JSON-lines: {"subject":..,"relation":..,"object":..,"split":"train"|"held_out"}
FactCorpus load_corpus(const std::filesystem::path& path);
std::string serialize_corpus(const FactCorpus& corpus);
void save_corpus(const FactCorpus& corpus, const std::filesystem::path& path);

struct SyntheticCorpusOptions {
  int first_names = 30;
  int last_names = 30;
  int objects_per_relation = 8;
  double held_out_fraction = 0.15;
  std::uint64_t seed = 1;
};

// Compositional fact world: each relation's object is a fixed function of
// one part of the subject's two-word name, so facts about held-out
// subjects follow from parts seen in training.
FactCorpus make_synthetic_corpus(const SyntheticCorpusOptions& options = {});

// Replaces the object of exactly floor(fraction * N) records, chosen by a
// seeded shuffle, with a different object seen with the same relation.
FactCorpus corrupt(const FactCorpus& corpus, double fraction, std::uint64_t seed);

// <bos> subject relation object .
TokenSequence render_fact(const FactRecord& record, const Vocabulary& vocab);
// <bos> subject relation
TokenSequence render_question(const FactRecord& record, const Vocabulary& vocab);
std::string question_text(const FactRecord& record);

}  // namespace lol::toymodel
