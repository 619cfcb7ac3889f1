#include "lol/eval/items.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lol/atomic_file.hpp"
#include "lol/error.hpp"

namespace lol::eval {

using nlohmann::ordered_json;

std::string_view to_string(ChoiceLabel label) {
  switch (label) {
    case ChoiceLabel::best: return "best";
    case ChoiceLabel::correct: return "correct";
    case ChoiceLabel::incorrect: return "incorrect";
  }
  return "incorrect";
}

ChoiceLabel parse_label(std::string_view text) {
  if (text == "best") return ChoiceLabel::best;
  if (text == "correct") return ChoiceLabel::correct;
  if (text == "incorrect") return ChoiceLabel::incorrect;
  throw ValidationError("unknown choice label '" + std::string(text) + "'");
}

void McItem::validate() const {
  std::size_t best = 0, incorrect = 0;
  for (const auto& c : choices) {
    if (c.label == ChoiceLabel::best) ++best;
    if (c.label == ChoiceLabel::incorrect) ++incorrect;
  }
  if (best != 1) throw ValidationError("item " + id + ": needs exactly one best choice");
  if (incorrect == 0) throw ValidationError("item " + id + ": needs at least one incorrect choice");
}

std::vector<ChoiceLabel> McItem::labels() const {
  std::vector<ChoiceLabel> out;
  out.reserve(choices.size());
  for (const auto& c : choices) out.push_back(c.label);
  return out;
}

void CompletionItem::validate() const {
  if (completions.size() < 2) throw ValidationError("item " + id + ": needs at least 2 completions");
  if (correct_index >= completions.size()) {
    throw ValidationError("item " + id + ": correct_index out of bounds");
  }
}

namespace {

template <typename Parse>
auto load_jsonl(const std::filesystem::path& path, Parse parse) {
  if (!std::filesystem::exists(path)) throw ValidationError("dataset not found: " + path.string());
  std::istringstream in(read_file(path));
  std::vector<decltype(parse(ordered_json{}))> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto item = parse(ordered_json::parse(line));
      item.validate();
      out.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw IngestionError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw ValidationError("dataset is empty: " + path.string());
  return out;
}

}  // namespace

std::vector<McItem> load_mc_dataset(const std::filesystem::path& path) {
  return load_jsonl(path, [](const ordered_json& j) {
    McItem item;
    item.id = j.at("id").get<std::string>();
    item.question = j.at("question").get<std::string>();
    for (const auto& c : j.at("choices")) {
      item.choices.push_back({c.at("text").get<std::string>(), parse_label(c.at("label").get<std::string>())});
    }
    return item;
  });
}

std::string serialize_mc_dataset(const std::vector<McItem>& items) {
  std::string out;
  for (const auto& item : items) {
    ordered_json j;
    j["id"] = item.id;
    j["question"] = item.question;
    j["choices"] = ordered_json::array();
    for (const auto& c : item.choices) {
      j["choices"].push_back({{"text", c.text}, {"label", std::string(to_string(c.label))}});
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<CompletionItem> load_completion_dataset(const std::filesystem::path& path) {
  return load_jsonl(path, [](const ordered_json& j) {
    CompletionItem item;
    item.id = j.at("id").get<std::string>();
    item.prefix = j.at("prefix").get<std::string>();
    item.completions = j.at("completions").get<std::vector<std::string>>();
    item.correct_index = j.at("correct_index").get<std::size_t>();
    return item;
  });
}

std::string serialize_completion_dataset(const std::vector<CompletionItem>& items) {
  std::string out;
  for (const auto& item : items) {
    ordered_json j;
    j["id"] = item.id;
    j["prefix"] = item.prefix;
    j["completions"] = item.completions;
    j["correct_index"] = item.correct_index;
    out += j.dump();
    out += '\n';
  }
  return out;
}

namespace {

std::map<std::string, std::vector<std::string>> relation_pools(const toymodel::FactCorpus& corpus) {
  std::map<std::string, std::set<std::string>> sets;
  for (const auto& r : corpus.records) sets[r.relation].insert(r.object);
  std::map<std::string, std::vector<std::string>> out;
  for (auto& [rel, objs] : sets) out[rel] = {objs.begin(), objs.end()};
  return out;
}

std::vector<std::string> wrong_objects(const std::vector<std::string>& pool, const std::string& truth,
                                       std::size_t count, std::mt19937_64& rng) {
  std::vector<std::string> others;
  for (const auto& o : pool) {
    if (o != truth) others.push_back(o);
  }
  if (others.size() < count) {
    throw ValidationError("relation pool too small to draw " + std::to_string(count) + " wrong objects");
  }
  std::shuffle(others.begin(), others.end(), rng);
  others.resize(count);
  return others;
}

}  // namespace

std::vector<McItem> build_synthetic_mc(const toymodel::FactCorpus& corpus, std::uint64_t seed) {
  const auto pools = relation_pools(corpus);
  std::mt19937_64 rng(seed);
  std::vector<McItem> items;
  std::size_t index = 0;
  for (const auto& r : corpus.records) {
    if (r.split != toymodel::Split::held_out) continue;
    McItem item;
    item.id = "fact-" + std::to_string(index++);
    item.question = toymodel::question_text(r);
    item.choices.push_back({r.object, ChoiceLabel::best});
    item.choices.push_back({r.object + " " + std::string(toymodel::Vocabulary::kEndWord), ChoiceLabel::correct});
    for (auto& w : wrong_objects(pools.at(r.relation), r.object, 2, rng)) {
      item.choices.push_back({std::move(w), ChoiceLabel::incorrect});
    }
    items.push_back(std::move(item));
  }
  if (items.empty()) throw ValidationError("corpus has no held-out facts to build an MC set from");
  return items;
}

std::vector<CompletionItem> build_synthetic_completion(const toymodel::FactCorpus& corpus,
                                                       std::uint64_t seed) {
  const auto pools = relation_pools(corpus);
  const std::string end{toymodel::Vocabulary::kEndWord};
  std::mt19937_64 rng(seed);
  std::vector<CompletionItem> items;
  std::size_t index = 0;
  for (const auto& r : corpus.records) {
    if (r.split != toymodel::Split::held_out) continue;
    CompletionItem item;
    item.id = "completion-" + std::to_string(index++);
    item.prefix = toymodel::question_text(r);
    for (auto& w : wrong_objects(pools.at(r.relation), r.object, 2, rng)) {
      item.completions.push_back(w + " " + end);
    }
    item.correct_index = static_cast<std::size_t>(rng() % 3);
    item.completions.insert(item.completions.begin() + static_cast<std::ptrdiff_t>(item.correct_index),
                            r.object + " " + end);
    items.push_back(std::move(item));
  }
  if (items.empty()) throw ValidationError("corpus has no held-out facts to build a completion set from");
  return items;
}

}  // namespace lol::eval
