#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "lol/common.hpp"

namespace lol::engine {

enum class Preset { greedy, icd, dola_like, lol };
enum class ScoreNormalization { total, per_token };
// Where the instruction goes relative to the decoding context.
enum class ConcatOrder { instruction_first, context_first };

std::string_view to_string(Preset preset);
std::string_view to_string(ScoreNormalization normalization);
std::string_view to_string(ConcatOrder order);
Preset parse_preset(std::string_view text);

// Every knob of one decode step.
//
// The contrast coefficients default to 1, which recovers the plain
// difference of log-probabilities at each stage. The exit layer defaults to
// one below the top of the model.
struct FusionConfig {
  double omega = 0.5;          // weight of the exit-layer contrast, (0, 1]
  double omega_prime = 0.5;    // weight of the refocus contrast, [0, 1]; 0 disables it
  double lambda = 1.0;         // amateur coefficient at the final layer
  double lambda_prime = 1.0;   // amateur coefficient at the exit layer
  double lambda_dprime = 1.0;  // amateur coefficient under the instruction
  std::optional<LayerIndex> exit_layer;  // unset: n_layers - 1 (at least 1)
  std::string instruction{kDefaultInstruction};
  Preset preset = Preset::lol;
  ScoreNormalization score_normalization = ScoreNormalization::total;
  ConcatOrder concat_order = ConcatOrder::instruction_first;
  // lol preset only: false skips the exit-layer stage entirely.
  bool multi_layer_fusion = true;
  // Extension, off at 0: restrict the final distribution to tokens whose
  // base probability is at least alpha times the base maximum.
  double plausibility_alpha = 0.0;

  friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

LayerIndex resolved_exit_layer(const FusionConfig& config, int n_layers);

// Range checks. `n_layers` > 0 also checks the exit layer.
void validate(const FusionConfig& config, int n_layers = 0);

// Sets one documented key; unknown keys and malformed values throw
// ValidationError.
void apply_setting(FusionConfig& config, std::string_view key, std::string_view value);

// Flat `key = value` lines; '#' starts a comment.
FusionConfig parse_fusion_config(std::string_view text);
FusionConfig load_fusion_config(const std::filesystem::path& path);

// Canonical key-value text, every key in documented order.
std::string to_config_text(const FusionConfig& config);

}  // namespace lol::engine
