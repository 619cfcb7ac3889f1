#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lol/engine/decode.hpp"
#include "lol/eval/metrics.hpp"
#include "lol/toymodel/vocabulary.hpp"

namespace lol::eval {

// Maps dataset text to token ids for the engine.
class TextCodec {
 public:
  virtual ~TextCodec() = default;
  virtual TokenSequence prompt(std::string_view text) const = 0;
  virtual TokenSequence continuation(std::string_view text) const = 0;
  virtual TokenSequence instruction(std::string_view text) const = 0;
};

// Prompt template: <bos> followed by the question words. Continuations
// and instructions are plain word sequences.
class VocabularyCodec final : public TextCodec {
 public:
  explicit VocabularyCodec(toymodel::Vocabulary vocab) : vocab_(std::move(vocab)) {}
  TokenSequence prompt(std::string_view text) const override;
  TokenSequence continuation(std::string_view text) const override;
  TokenSequence instruction(std::string_view text) const override;

 private:
  toymodel::Vocabulary vocab_;
};

// Text is whitespace-separated token ids; used with replay archives.
class NumericCodec final : public TextCodec {
 public:
  TokenSequence prompt(std::string_view text) const override;
  TokenSequence continuation(std::string_view text) const override;
  TokenSequence instruction(std::string_view text) const override;
};

engine::InstructionEncoder instruction_encoder(std::shared_ptr<const TextCodec> codec);

Scorer make_scorer(engine::ContrastSession& session, const engine::FusionConfig& config,
                   const TextCodec& codec);

// Hash of the canonical config text and the provider identities.
std::string config_fingerprint(const engine::FusionConfig& config,
                               const engine::ContrastSession& session);

struct SweepRow {
  double key = 0.0;  // exit layer, or omega_prime
  double mc1 = 0.0, mc2 = 0.0, mc3 = 0.0;
};

// Row key 0 is the baseline with multi-layer fusion off (icd preset); then
// one row per exit layer with refocus disabled.
std::vector<SweepRow> sweep_layers(engine::ContrastSession& session, const std::vector<McItem>& items,
                                   const engine::FusionConfig& config,
                                   std::span<const LayerIndex> layers, const TextCodec& codec);

// Row key 0 is the baseline with refocus disabled; then one row per
// omega_prime value at the configured exit layer.
std::vector<SweepRow> sweep_omega_prime(engine::ContrastSession& session,
                                        const std::vector<McItem>& items,
                                        const engine::FusionConfig& config,
                                        std::span<const double> values, const TextCodec& codec);

std::string sweep_csv(const std::vector<SweepRow>& rows, std::string_view key_name);

}  // namespace lol::eval
