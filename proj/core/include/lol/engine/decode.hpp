#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lol/common.hpp"
#include "lol/engine/fusion_config.hpp"
#include "lol/engine/session.hpp"

namespace lol::engine {

enum class StageName { final_contrast, exit_contrast, fused, refocus, final };

std::string_view to_string(StageName name);

struct ContrastStage {
  StageName name = StageName::final_contrast;
  std::vector<double> values;
};

struct TokenDistribution {
  std::vector<double> probs;
  std::vector<double> log_probs;
  FusionConfig provenance;
};

// Everything one decode step computed. Stages a preset skips stay empty.
struct StepResult {
  std::optional<ContrastStage> final_contrast;
  std::optional<ContrastStage> exit_contrast;
  std::optional<ContrastStage> fused;
  std::optional<ContrastStage> refocus;
  ContrastStage final;
  TokenDistribution distribution;
};

// log_softmax(base_raw) - coeff * log_softmax(amateur_raw)
ContrastStage contrast(std::span<const double> base_raw, std::span<const double> amateur_raw,
                       double coeff, StageName name = StageName::final_contrast);

// f_t + omega * f_exit
ContrastStage fuse_multilayer(const ContrastStage& f_t, const ContrastStage& f_exit, double omega);

// Contrast of the two providers' final layers, both conditioned on the
// instruction joined to `prefix` in the given order.
ContrastStage refocus(ContrastSession& session, const TokenSequence& prefix,
                      const TokenSequence& instruction, double lambda_dprime,
                      ConcatOrder order = ConcatOrder::instruction_first);

// One full decode step for the configured preset.
StepResult lol_step(ContrastSession& session, const TokenSequence& prefix, const FusionConfig& config);

// Greedy decoding over lol_step; stops after a stop token or the budget.
// A context overflow mid-generation throws ContextOverflowError whose
// partial() holds the sequence generated so far.
TokenSequence greedy_generate(ContrastSession& session, const TokenSequence& prompt,
                              const FusionConfig& config, std::size_t max_new_tokens,
                              std::span<const TokenId> stop_tokens = {});

// Teacher-forced sum of log p(token | prompt + continuation so far) under
// lol_step; divided by the continuation length for per_token normalization.
double score_continuation(ContrastSession& session, const TokenSequence& prompt,
                          const TokenSequence& continuation, const FusionConfig& config);

}  // namespace lol::engine
