#pragma once

#include <memory>

#include "lol/providers/provider.hpp"
#include "lol/toymodel/model.hpp"

namespace lol::providers {

// Adapter over the toy transformer; delegates to forward_layered.
class ToyProvider final : public LogitProvider {
 public:
  explicit ToyProvider(std::shared_ptr<const toymodel::ModelParams> model, std::string name = {});

  const ProviderInfo& info() const noexcept override { return info_; }
  LayeredLogits query(const TokenSequence& prefix, std::span<const LayerIndex> layers) const override;

  const toymodel::ModelParams& model() const noexcept { return *model_; }

 private:
  std::shared_ptr<const toymodel::ModelParams> model_;
  ProviderInfo info_;
};

}  // namespace lol::providers
