#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lol/common.hpp"
#include "lol/toymodel/vocabulary.hpp"

namespace lol::toymodel {

// Shape of the decoder-only transformer. Pre-norm blocks with RMSNorm,
// learned positions, ReLU MLP, no biases, untied unembedding.
struct ModelConfig {
  int vocab_size = 0;
  int n_layers = 4;
  int d_model = 48;
  int n_heads = 4;
  int d_ff = 192;
  int max_seq_len = 16;

  void validate() const;
  int head_dim() const { return d_model / n_heads; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TensorInfo {
  std::string name;
  std::size_t offset = 0;
  std::vector<std::size_t> shape;

  std::size_t numel() const;
};

// Offsets of every named tensor inside the flat weight buffer.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelConfig& config);

  struct Block {
    std::size_t ln1, wq, wk, wv, wo, ln2, w1, w2;
  };

  std::size_t tok_emb = 0, pos_emb = 0, lnf = 0, unembed = 0;
  std::vector<Block> blocks;
  std::vector<TensorInfo> tensors;
  std::size_t total = 0;
};

struct ModelParams {
  ModelConfig config;
  std::uint64_t seed = 0;
  Vocabulary vocab;
  std::vector<float> weights;

  ParamLayout layout() const { return ParamLayout(config); }
  std::uint64_t checksum() const;
  bool all_finite() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.config == b.config && a.seed == b.seed && a.vocab == b.vocab &&
           a.weights == b.weights;
  }
};

// Gaussian init (std 0.02, residual projections scaled by 1/sqrt(2*n_layers)),
// unit norm gains. Deterministic in `seed`.
ModelParams init_params(const ModelConfig& config, Vocabulary vocab, std::uint64_t seed);

// Standard forward pass: vocab-sized logits at the last position.
std::vector<float> final_logits(const ModelParams& model, const TokenSequence& prefix);

// Early-exit readout: final norm + unembedding applied to the residual
// stream after block L at the last position, for each requested L.
LayeredLogits forward_layered(const ModelParams& model, const TokenSequence& prefix,
                              std::span<const LayerIndex> layers);

// Checks prefix length and token ids against the model; throws.
void validate_prefix(const ModelConfig& config, const TokenSequence& prefix);

}  // namespace lol::toymodel
