#include "lol/toymodel/corpus.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lol/atomic_file.hpp"
#include "lol/error.hpp"

namespace lol::toymodel {

using nlohmann::ordered_json;

std::string_view to_string(Split split) {
  return split == Split::train ? "train" : "held_out";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "held_out" || text == "heldout" || text == "test") return Split::held_out;
  throw ValidationError("unknown split '" + std::string(text) + "'");
}

std::vector<FactRecord> FactCorpus::select(Split split) const {
  std::vector<FactRecord> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

std::vector<std::string> FactCorpus::words() const {
  std::set<std::string> all;
  for (const auto& r : records) {
    for (const auto* field : {&r.subject, &r.relation, &r.object}) {
      for (auto& w : split_words(*field)) all.insert(std::move(w));
    }
  }
  return {all.begin(), all.end()};
}

FactCorpus load_corpus(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  FactCorpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = ordered_json::parse(line);
      FactRecord r;
      r.subject = j.at("subject").get<std::string>();
      r.relation = j.at("relation").get<std::string>();
      r.object = j.at("object").get<std::string>();
      r.split = j.contains("split") ? parse_split(j.at("split").get<std::string>()) : Split::train;
      if (split_words(r.subject).empty() || split_words(r.relation).empty() ||
          split_words(r.object).empty()) {
        throw ValidationError("empty field");
      }
      corpus.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw IngestionError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

std::string serialize_corpus(const FactCorpus& corpus) {
  std::string out;
  for (const auto& r : corpus.records) {
    ordered_json j;
    j["subject"] = r.subject;
    j["relation"] = r.relation;
    j["object"] = r.object;
    j["split"] = std::string(to_string(r.split));
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const FactCorpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_corpus(corpus));
}

namespace {

constexpr std::array<std::string_view, 12> kSyllables = {
    "ba", "de", "ki", "lo", "mu", "na", "re", "si", "to", "va", "zo", "pe"};

std::vector<std::string> make_names(int count, std::string_view suffix) {
  std::vector<std::string> names;
  for (std::size_t a = 0; a < kSyllables.size() && static_cast<int>(names.size()) < count; ++a) {
    for (std::size_t b = 0; b < kSyllables.size() && static_cast<int>(names.size()) < count; ++b) {
      if (a == b) continue;
      names.push_back(std::string(kSyllables[a]) + std::string(kSyllables[b]) + std::string(suffix));
    }
  }
  return names;
}

struct RelationSpec {
  std::string_view name;
  bool keyed_on_last;  // else keyed on the first name
  std::array<std::string_view, 12> objects;
};

constexpr std::array<RelationSpec, 3> kRelations = {{
    {"lives_in", true,
     {"paris", "rome", "oslo", "lima", "cairo", "delhi", "tokyo", "quito", "dakar", "hanoi",
      "sofia", "perth"}},
    {"works_as", false,
     {"baker", "nurse", "pilot", "judge", "miner", "tailor", "farmer", "singer", "lawyer",
      "doctor", "sailor", "welder"}},
    {"likes", true,
     {"rice", "figs", "soup", "plums", "bread", "honey", "lemons", "olives", "beans", "cheese",
      "mangos", "dates"}},
}};

}  // namespace

FactCorpus make_synthetic_corpus(const SyntheticCorpusOptions& options) {
  const int max_names = static_cast<int>(kSyllables.size() * (kSyllables.size() - 1));
  if (options.first_names < 2 || options.last_names < 2 || options.first_names > max_names ||
      options.last_names > max_names) {
    throw ValidationError("synthetic corpus name counts must be in [2, " +
                          std::to_string(max_names) + "]");
  }
  if (options.objects_per_relation < 2 ||
      options.objects_per_relation > static_cast<int>(kRelations[0].objects.size())) {
    throw ValidationError("objects_per_relation must be in [2, 12]");
  }
  if (!(options.held_out_fraction >= 0.0 && options.held_out_fraction < 1.0)) {
    throw ValidationError("held_out_fraction must be in [0, 1)");
  }

  std::mt19937_64 rng(options.seed);
  const auto firsts = make_names(options.first_names, "");
  const auto lasts = make_names(options.last_names, "n");

  // rule[r][name] -> object index for relation r.
  std::vector<std::vector<int>> rule(kRelations.size());
  for (std::size_t r = 0; r < kRelations.size(); ++r) {
    const int n = kRelations[r].keyed_on_last ? options.last_names : options.first_names;
    for (int i = 0; i < n; ++i) {
      rule[r].push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(options.objects_per_relation)));
    }
  }

  std::vector<std::pair<int, int>> subjects;
  for (int f = 0; f < options.first_names; ++f) {
    for (int l = 0; l < options.last_names; ++l) subjects.emplace_back(f, l);
  }
  std::vector<std::size_t> order(subjects.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_held = static_cast<std::size_t>(options.held_out_fraction * static_cast<double>(subjects.size()));
  std::vector<bool> held(subjects.size(), false);
  for (std::size_t i = 0; i < n_held; ++i) held[order[i]] = true;

  FactCorpus corpus;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    auto [f, l] = subjects[s];
    for (std::size_t r = 0; r < kRelations.size(); ++r) {
      const auto& rel = kRelations[r];
      const int key = rel.keyed_on_last ? l : f;
      FactRecord rec;
      rec.subject = firsts[f] + " " + lasts[l];
      rec.relation = std::string(rel.name);
      rec.object = std::string(rel.objects[static_cast<std::size_t>(rule[r][key])]);
      rec.split = held[s] ? Split::held_out : Split::train;
      corpus.records.push_back(std::move(rec));
    }
  }
  return corpus;
}

FactCorpus corrupt(const FactCorpus& corpus, double fraction, std::uint64_t seed) {
  if (corpus.empty()) throw ValidationError("cannot corrupt an empty corpus");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError("corruption fraction must be in (0, 1]");
  }
  // Object pool per relation, in first-seen order for determinism.
  std::map<std::string, std::vector<std::string>> pool;
  for (const auto& r : corpus.records) {
    auto& objs = pool[r.relation];
    if (std::find(objs.begin(), objs.end(), r.object) == objs.end()) objs.push_back(r.object);
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_corrupt = static_cast<std::size_t>(fraction * static_cast<double>(corpus.size()));

  FactCorpus out = corpus;
  for (std::size_t k = 0; k < n_corrupt; ++k) {
    auto& rec = out.records[order[k]];
    const auto& objs = pool.at(rec.relation);
    if (objs.size() < 2) {
      throw ValidationError("cannot corrupt: relation '" + rec.relation +
                            "' has an object pool of size 1");
    }
    std::vector<const std::string*> alternatives;
    for (const auto& o : objs) {
      if (o != rec.object) alternatives.push_back(&o);
    }
    rec.object = *alternatives[rng() % alternatives.size()];
  }
  return out;
}

std::string question_text(const FactRecord& record) {
  return record.subject + " " + record.relation;
}

TokenSequence render_question(const FactRecord& record, const Vocabulary& vocab) {
  TokenSequence out{Vocabulary::kBos};
  auto q = vocab.encode(question_text(record));
  out.insert(out.end(), q.begin(), q.end());
  return out;
}

TokenSequence render_fact(const FactRecord& record, const Vocabulary& vocab) {
  TokenSequence out = render_question(record, vocab);
  auto o = vocab.encode(record.object);
  out.insert(out.end(), o.begin(), o.end());
  out.push_back(Vocabulary::kEnd);
  return out;
}

}  // namespace lol::toymodel
