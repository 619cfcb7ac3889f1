#pragma once

// Internal forward/backward kernels shared by inference and training.

#include <vector>

#include "lol/toymodel/model.hpp"

namespace lol::toymodel::detail {

struct BlockActivations {
  std::vector<float> x_in;   // [T, d] residual entering the block
  std::vector<float> n1;     // [T, d]
  std::vector<float> r1;     // [T] inverse rms
  std::vector<float> q, k, v;  // [T, d]
  std::vector<float> att;    // [H, T, T] causal attention weights
  std::vector<float> ctx;    // [T, d] attention output before wo
  std::vector<float> x_mid;  // [T, d]
  std::vector<float> n2;     // [T, d]
  std::vector<float> r2;     // [T]
  std::vector<float> h_pre;  // [T, ff]
  std::vector<float> h_act;  // [T, ff]
};

struct Activations {
  int length = 0;
  std::vector<BlockActivations> blocks;
  std::vector<float> x_out;   // [T, d] residual after the last block
  std::vector<float> nf;      // [T, d]
  std::vector<float> rf;      // [T]
  std::vector<float> logits;  // [T, V], only when requested
};

// Runs all blocks; fills final-norm outputs and logits for every position
// when `with_logits` is set.
void forward(const ModelParams& model, const ParamLayout& layout, const TokenId* tokens,
             int length, Activations& acts, bool with_logits);

// Residual stream after block `layer` (1-based) at position `pos`.
const float* residual_after(const Activations& acts, int layer, int n_layers, int pos, int d_model);

// Final RMSNorm then unembedding of one hidden row.
void readout(const ModelParams& model, const ParamLayout& layout, const float* hidden,
             float* logits);

// Backpropagates dlogits [T, V] into `grads` (accumulating, same layout
// as the weights).
void backward(const ModelParams& model, const ParamLayout& layout, const TokenId* tokens,
              const Activations& acts, const std::vector<float>& dlogits,
              std::vector<float>& grads);

}  // namespace lol::toymodel::detail
