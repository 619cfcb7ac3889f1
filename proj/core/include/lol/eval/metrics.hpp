#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lol/eval/items.hpp"

namespace lol::eval {

// Scores a continuation given a prompt; higher is more likely.
using Scorer = std::function<double(std::string_view prompt, std::string_view continuation)>;

enum class Mc2Mode {
  mass,     // normalized probability mass on the correct set
  boolean,  // 1 iff that mass exceeds the incorrect mass
};

std::vector<double> mc_scores(const McItem& item, const Scorer& scorer);

// 1 iff the best choice's score is strictly above every other score.
int mc1(std::span<const double> scores, std::span<const ChoiceLabel> labels);
double mc2(std::span<const double> scores, std::span<const ChoiceLabel> labels,
           Mc2Mode mode = Mc2Mode::mass);
// Fraction of correct choices scoring strictly above the best incorrect one.
double mc3(std::span<const double> scores, std::span<const ChoiceLabel> labels);

// Fraction of items whose correct completion strictly outscores the rest.
double completion_accuracy(const std::vector<CompletionItem>& items, const Scorer& scorer);

struct ItemResult {
  std::string id;
  std::vector<double> scores;
  std::optional<double> mc1, mc2, mc3, accuracy;
};

struct MetricReport {
  std::optional<double> mc1, mc2, mc3, accuracy;
  std::size_t n_items = 0;
  std::vector<ItemResult> items;
  std::string fingerprint;
};

MetricReport evaluate_mc(const std::vector<McItem>& items, const Scorer& scorer,
                         Mc2Mode mode = Mc2Mode::mass);
MetricReport evaluate_completion(const std::vector<CompletionItem>& items, const Scorer& scorer);

// Per-item CSV with a header row.
std::string report_csv(const MetricReport& report);
// Aggregates, item count and fingerprint; `extra` entries are copied in
// as string fields.
std::string report_summary_json(const MetricReport& report,
                                const std::vector<std::pair<std::string, std::string>>& extra = {});

}  // namespace lol::eval
