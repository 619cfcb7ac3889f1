#pragma once

#include <filesystem>
#include <string>

#include "lol/toymodel/model.hpp"

namespace lol::toymodel {

inline constexpr int kCheckpointVersion = 1;

// Line 1: JSON header (version, config, seed, vocab, tensor table, checksum).
// Then the flat weight buffer as little-endian f32.
std::string serialize_checkpoint(const ModelParams& model);
ModelParams deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace lol::toymodel
