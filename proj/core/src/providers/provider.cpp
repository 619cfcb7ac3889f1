#include "lol/providers/provider.hpp"

#include "lol/error.hpp"
#include "lol/providers/toy_provider.hpp"

namespace lol::providers {

void validate_layers(const ProviderInfo& info, std::span<const LayerIndex> layers) {
  if (layers.empty()) throw ValidationError("layer set must be non-empty");
  for (LayerIndex l : layers) {
    if (l < 1 || l > info.n_layers) {
      throw ValidationError("layer index " + std::to_string(l) + " outside [1, " +
                            std::to_string(info.n_layers) + "] for provider " + info.identity);
    }
  }
}

ToyProvider::ToyProvider(std::shared_ptr<const toymodel::ModelParams> model, std::string name)
    : model_(std::move(model)) {
  if (!model_) throw ValidationError("toy provider needs a model");
  info_.identity = name.empty() ? "toy:" + hex64(model_->checksum()) : std::move(name);
  info_.vocab_size = model_->config.vocab_size;
  info_.n_layers = model_->config.n_layers;
  info_.arbitrary_prefixes = true;
  info_.max_context = static_cast<std::size_t>(model_->config.max_seq_len);
}

LayeredLogits ToyProvider::query(const TokenSequence& prefix,
                                 std::span<const LayerIndex> layers) const {
  validate_layers(info_, layers);
  return toymodel::forward_layered(*model_, prefix, layers);
}

}  // namespace lol::providers
