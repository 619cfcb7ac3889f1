#include "lol/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "lol/error.hpp"

namespace lol::eval {

namespace {

void check_labels(std::span<const double> scores, std::span<const ChoiceLabel> labels) {
  if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
  std::size_t best = 0, incorrect = 0;
  for (auto l : labels) {
    best += l == ChoiceLabel::best;
    incorrect += l == ChoiceLabel::incorrect;
  }
  if (best != 1) throw ValidationError("exactly one best label required");
  if (incorrect == 0) throw ValidationError("at least one incorrect label required");
  for (double s : scores) {
    if (std::isnan(s)) throw ValidationError("NaN choice score");
  }
}

bool is_correct(ChoiceLabel l) { return l != ChoiceLabel::incorrect; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

double mean(const std::vector<ItemResult>& items, std::optional<double> ItemResult::*field) {
  double sum = 0.0;
  for (const auto& it : items) sum += *(it.*field);
  return sum / static_cast<double>(items.size());
}

}  // namespace

std::vector<double> mc_scores(const McItem& item, const Scorer& scorer) {
  std::vector<double> out;
  out.reserve(item.choices.size());
  for (const auto& choice : item.choices) {
    try {
      out.push_back(scorer(item.question, choice.text));
    } catch (const Error& e) {
      throw Error(e.kind(), "item " + item.id + ": " + e.what());
    }
  }
  return out;
}

int mc1(std::span<const double> scores, std::span<const ChoiceLabel> labels) {
  check_labels(scores, labels);
  const auto best = static_cast<std::size_t>(
      std::find(labels.begin(), labels.end(), ChoiceLabel::best) - labels.begin());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i != best && !(scores[best] > scores[i])) return 0;
  }
  return 1;
}

double mc2(std::span<const double> scores, std::span<const ChoiceLabel> labels, Mc2Mode mode) {
  check_labels(scores, labels);
  const double mx = *std::max_element(scores.begin(), scores.end());
  if (!std::isfinite(mx)) throw ValidationError("mc2 needs a finite maximum score");
  double correct = 0.0, total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double w = std::exp(scores[i] - mx);
    total += w;
    if (is_correct(labels[i])) correct += w;
  }
  const double mass = correct / total;
  if (mode == Mc2Mode::boolean) return correct > total - correct ? 1.0 : 0.0;
  return mass;
}

double mc3(std::span<const double> scores, std::span<const ChoiceLabel> labels) {
  check_labels(scores, labels);
  double max_incorrect = -INFINITY;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!is_correct(labels[i])) max_incorrect = std::max(max_incorrect, scores[i]);
  }
  std::size_t n_correct = 0, above = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!is_correct(labels[i])) continue;
    ++n_correct;
    if (scores[i] > max_incorrect) ++above;
  }
  return static_cast<double>(above) / static_cast<double>(n_correct);
}

namespace {

ItemResult score_completion(const CompletionItem& item, const Scorer& scorer) {
  item.validate();
  ItemResult r;
  r.id = item.id;
  for (const auto& c : item.completions) {
    try {
      r.scores.push_back(scorer(item.prefix, c));
    } catch (const Error& e) {
      throw Error(e.kind(), "item " + item.id + ": " + e.what());
    }
  }
  bool strictly_best = true;
  for (std::size_t i = 0; i < r.scores.size(); ++i) {
    if (i != item.correct_index && !(r.scores[item.correct_index] > r.scores[i])) strictly_best = false;
  }
  r.accuracy = strictly_best ? 1.0 : 0.0;
  return r;
}

}  // namespace

double completion_accuracy(const std::vector<CompletionItem>& items, const Scorer& scorer) {
  return *evaluate_completion(items, scorer).accuracy;
}

MetricReport evaluate_mc(const std::vector<McItem>& items, const Scorer& scorer, Mc2Mode mode) {
  if (items.empty()) throw ValidationError("no MC items to evaluate");
  MetricReport report;
  report.n_items = items.size();
  for (const auto& item : items) {
    item.validate();
    ItemResult r;
    r.id = item.id;
    r.scores = mc_scores(item, scorer);
    const auto labels = item.labels();
    r.mc1 = mc1(r.scores, labels);
    r.mc2 = mc2(r.scores, labels, mode);
    r.mc3 = mc3(r.scores, labels);
    report.items.push_back(std::move(r));
  }
  report.mc1 = mean(report.items, &ItemResult::mc1);
  report.mc2 = mean(report.items, &ItemResult::mc2);
  report.mc3 = mean(report.items, &ItemResult::mc3);
  return report;
}

MetricReport evaluate_completion(const std::vector<CompletionItem>& items, const Scorer& scorer) {
  if (items.empty()) throw ValidationError("no completion items to evaluate");
  MetricReport report;
  report.n_items = items.size();
  for (const auto& item : items) report.items.push_back(score_completion(item, scorer));
  report.accuracy = mean(report.items, &ItemResult::accuracy);
  return report;
}

std::string report_csv(const MetricReport& report) {
  const bool mc = report.mc1.has_value();
  std::string out = mc ? "id,mc1,mc2,mc3,scores\n" : "id,correct,scores\n";
  for (const auto& it : report.items) {
    out += it.id;
    if (mc) {
      out += "," + fmt(*it.mc1) + "," + fmt(*it.mc2) + "," + fmt(*it.mc3);
    } else {
      out += "," + fmt(*it.accuracy);
    }
    out += ",";
    for (std::size_t i = 0; i < it.scores.size(); ++i) {
      if (i) out += ';';
      out += fmt(it.scores[i]);
    }
    out += '\n';
  }
  return out;
}

std::string report_summary_json(const MetricReport& report,
                                const std::vector<std::pair<std::string, std::string>>& extra) {
  nlohmann::ordered_json j;
  j["n_items"] = report.n_items;
  if (report.mc1) j["mc1"] = *report.mc1;
  if (report.mc2) j["mc2"] = *report.mc2;
  if (report.mc3) j["mc3"] = *report.mc3;
  if (report.accuracy) j["accuracy"] = *report.accuracy;
  j["fingerprint"] = report.fingerprint;
  for (const auto& [k, v] : extra) j[k] = v;
  return j.dump(2) + "\n";
}

}  // namespace lol::eval
