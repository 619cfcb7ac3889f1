#include "lol/engine/decode.hpp"

#include <algorithm>
#include <cmath>

#include "lol/engine/math.hpp"
#include "lol/error.hpp"

namespace lol::engine {

namespace {

void require_same_length(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ValidationError("score vectors differ in length (" + std::to_string(a) + " vs " +
                          std::to_string(b) + ")");
  }
}

TokenDistribution distribution_of(const std::vector<double>& final_scores,
                                  const std::vector<double>* base_final_raw,
                                  const FusionConfig& config) {
  TokenDistribution dist;
  dist.provenance = config;
  if (config.plausibility_alpha > 0.0 && base_final_raw) {
    // Keep tokens with p_base >= alpha * max p_base, i.e. log-gap <= -log(alpha).
    const double top = *std::max_element(base_final_raw->begin(), base_final_raw->end());
    const double cutoff = top + std::log(config.plausibility_alpha);
    std::vector<double> kept;
    for (std::size_t i = 0; i < final_scores.size(); ++i) {
      if ((*base_final_raw)[i] >= cutoff) kept.push_back(final_scores[i]);
    }
    const double lse = logsumexp(kept);
    dist.log_probs.resize(final_scores.size());
    dist.probs.resize(final_scores.size());
    for (std::size_t i = 0; i < final_scores.size(); ++i) {
      const bool keep = (*base_final_raw)[i] >= cutoff;
      dist.log_probs[i] = keep ? final_scores[i] - lse : -INFINITY;
      dist.probs[i] = keep ? std::exp(dist.log_probs[i]) : 0.0;
    }
    return dist;
  }
  dist.log_probs = log_softmax(final_scores);
  dist.probs.resize(dist.log_probs.size());
  for (std::size_t i = 0; i < dist.probs.size(); ++i) dist.probs[i] = std::exp(dist.log_probs[i]);
  return dist;
}

void check_preset(const ContrastSession& session, const FusionConfig& config) {
  const bool needs_amateur = config.preset == Preset::icd || config.preset == Preset::lol;
  if (needs_amateur && !session.has_amateur()) {
    throw ConfigurationError("preset " + std::string(to_string(config.preset)) +
                             " needs an amateur provider");
  }
}

}  // namespace

std::string_view to_string(StageName name) {
  switch (name) {
    case StageName::final_contrast: return "final_contrast";
    case StageName::exit_contrast: return "exit_contrast";
    case StageName::fused: return "fused";
    case StageName::refocus: return "refocus";
    case StageName::final: return "final";
  }
  return "final";
}

ContrastStage contrast(std::span<const double> base_raw, std::span<const double> amateur_raw,
                       double coeff, StageName name) {
  require_same_length(base_raw.size(), amateur_raw.size());
  ContrastStage stage{name, log_softmax(base_raw)};
  if (coeff != 0.0) {
    const auto amateur = log_softmax(amateur_raw);
    for (std::size_t i = 0; i < stage.values.size(); ++i) stage.values[i] -= coeff * amateur[i];
  }
  return stage;
}

ContrastStage fuse_multilayer(const ContrastStage& f_t, const ContrastStage& f_exit, double omega) {
  require_same_length(f_t.values.size(), f_exit.values.size());
  if (!(omega > 0.0 && omega <= 1.0)) throw ValidationError("omega must be in (0, 1]");
  ContrastStage out{StageName::fused, f_t.values};
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += omega * f_exit.values[i];
  return out;
}

ContrastStage refocus(ContrastSession& session, const TokenSequence& prefix,
                      const TokenSequence& instruction, double lambda_dprime, ConcatOrder order) {
  if (instruction.empty()) throw ValidationError("refocus needs a non-empty instruction");
  TokenSequence joined;
  joined.reserve(prefix.size() + instruction.size());
  if (order == ConcatOrder::instruction_first) {
    joined.insert(joined.end(), instruction.begin(), instruction.end());
    joined.insert(joined.end(), prefix.begin(), prefix.end());
  } else {
    joined.insert(joined.end(), prefix.begin(), prefix.end());
    joined.insert(joined.end(), instruction.begin(), instruction.end());
  }
  const std::size_t limit = session.max_context();
  if (limit != 0 && joined.size() > limit) throw ContextOverflowError(joined.size(), limit);

  const LayerIndex top = session.n_layers();
  const auto& base = session.query(Role::base, joined, {top}).at(top);
  const auto& amateur = session.query(Role::amateur, joined, {top}).at(top);
  return contrast(base, amateur, lambda_dprime, StageName::refocus);
}

StepResult lol_step(ContrastSession& session, const TokenSequence& prefix, const FusionConfig& config) {
  validate(config, session.n_layers());
  check_preset(session, config);
  const std::size_t limit = session.max_context();
  if (limit != 0 && prefix.size() > limit) throw ContextOverflowError(prefix.size(), limit);

  const LayerIndex top = session.n_layers();
  const LayerIndex exit = resolved_exit_layer(config, top);
  StepResult step;

  switch (config.preset) {
    case Preset::greedy: {
      const auto& base = session.query(Role::base, prefix, {top}).at(top);
      step.final = ContrastStage{StageName::final, log_softmax(base)};
      step.distribution = distribution_of(step.final.values, nullptr, config);
      return step;
    }
    case Preset::dola_like: {
      const auto& logits = session.query(Role::base, prefix, {exit, top});
      step.final_contrast = contrast(logits.at(top), logits.at(exit), 1.0, StageName::final_contrast);
      step.final = ContrastStage{StageName::final, step.final_contrast->values};
      step.distribution = distribution_of(step.final.values, &logits.at(top), config);
      return step;
    }
    case Preset::icd: {
      const auto& base = session.query(Role::base, prefix, {top}).at(top);
      const auto& amateur = session.query(Role::amateur, prefix, {top}).at(top);
      step.final_contrast = contrast(base, amateur, config.lambda, StageName::final_contrast);
      step.final = ContrastStage{StageName::final, step.final_contrast->values};
      step.distribution = distribution_of(step.final.values, &base, config);
      return step;
    }
    case Preset::lol:
      break;
  }

  std::vector<LayerIndex> layers{top};
  if (config.multi_layer_fusion) layers.push_back(exit);
  const auto& base = session.query(Role::base, prefix, layers);
  const auto& amateur = session.query(Role::amateur, prefix, layers);

  step.final_contrast = contrast(base.at(top), amateur.at(top), config.lambda, StageName::final_contrast);
  if (config.multi_layer_fusion) {
    step.exit_contrast =
        contrast(base.at(exit), amateur.at(exit), config.lambda_prime, StageName::exit_contrast);
    step.fused = fuse_multilayer(*step.final_contrast, *step.exit_contrast, config.omega);
  } else {
    step.fused = ContrastStage{StageName::fused, step.final_contrast->values};
  }

  step.final = ContrastStage{StageName::final, step.fused->values};
  if (config.omega_prime > 0.0) {
    const auto instruction = session.encode_instruction(config.instruction);
    step.refocus = refocus(session, prefix, instruction, config.lambda_dprime, config.concat_order);
    for (std::size_t i = 0; i < step.final.values.size(); ++i) {
      step.final.values[i] += config.omega_prime * step.refocus->values[i];
    }
  }
  step.distribution = distribution_of(step.final.values, &base.at(top), config);
  return step;
}

TokenSequence greedy_generate(ContrastSession& session, const TokenSequence& prompt,
                              const FusionConfig& config, std::size_t max_new_tokens,
                              std::span<const TokenId> stop_tokens) {
  TokenSequence seq = prompt;
  for (std::size_t n = 0; n < max_new_tokens; ++n) {
    StepResult step;
    try {
      step = lol_step(session, seq, config);
    } catch (ContextOverflowError& e) {
      e.set_partial(seq);
      throw;
    }
    const TokenId next = argmax(step.distribution.log_probs);
    seq.push_back(next);
    if (std::find(stop_tokens.begin(), stop_tokens.end(), next) != stop_tokens.end()) break;
  }
  return seq;
}

double score_continuation(ContrastSession& session, const TokenSequence& prompt,
                          const TokenSequence& continuation, const FusionConfig& config) {
  if (continuation.empty()) throw ValidationError("continuation must be non-empty");
  if (prompt.empty()) throw ValidationError("prompt must be non-empty");
  const std::size_t limit = session.max_context();
  if (limit != 0 && prompt.size() + continuation.size() > limit) {
    throw ContextOverflowError(prompt.size() + continuation.size(), limit);
  }
  TokenSequence prefix = prompt;
  double total = 0.0;
  for (TokenId token : continuation) {
    if (token >= static_cast<TokenId>(session.vocab_size())) {
      throw ValidationError("continuation token " + std::to_string(token) + " >= vocab_size");
    }
    const auto step = lol_step(session, prefix, config);
    total += step.distribution.log_probs[token];
    prefix.push_back(token);
  }
  if (config.score_normalization == ScoreNormalization::per_token) {
    total /= static_cast<double>(continuation.size());
  }
  return total;
}

}  // namespace lol::engine
