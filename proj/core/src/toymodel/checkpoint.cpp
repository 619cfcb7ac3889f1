#include "lol/toymodel/checkpoint.hpp"

#include <json.hpp>

#include "../binary_io.hpp"
#include "lol/atomic_file.hpp"
#include "lol/error.hpp"

namespace lol::toymodel {

using nlohmann::ordered_json;

std::string serialize_checkpoint(const ModelParams& model) {
  const ParamLayout layout(model.config);
  if (layout.total != model.weights.size()) {
    throw ValidationError("weight buffer does not match the config layout");
  }
  ordered_json h;
  h["format"] = "lol-toymodel";
  h["version"] = kCheckpointVersion;
  h["config"] = {{"vocab_size", model.config.vocab_size}, {"n_layers", model.config.n_layers},
                 {"d_model", model.config.d_model},       {"n_heads", model.config.n_heads},
                 {"d_ff", model.config.d_ff},             {"max_seq_len", model.config.max_seq_len}};
  h["seed"] = model.seed;
  h["vocab"] = model.vocab.words();
  auto tensors = ordered_json::array();
  for (const auto& t : layout.tensors) tensors.push_back({{"name", t.name}, {"shape", t.shape}});
  h["tensors"] = std::move(tensors);
  h["weight_count"] = model.weights.size();
  h["checksum"] = hex64(model.checksum());

  std::string out = h.dump();
  out += '\n';
  out.reserve(out.size() + model.weights.size() * 4);
  for (float w : model.weights) binary::put_f32(out, w);
  return out;
}

ModelParams deserialize_checkpoint(std::string_view bytes) {
  const auto nl = binary::header_end(bytes);
  ordered_json h;
  try {
    h = ordered_json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed checkpoint header: ") + e.what());
  }
  try {
    if (h.at("format") != "lol-toymodel") throw IoError("not a toy-model checkpoint");
    if (h.at("version").get<int>() != kCheckpointVersion) {
      throw IoError("unsupported checkpoint version " + h.at("version").dump());
    }
    ModelParams m;
    const auto& c = h.at("config");
    m.config.vocab_size = c.at("vocab_size").get<int>();
    m.config.n_layers = c.at("n_layers").get<int>();
    m.config.d_model = c.at("d_model").get<int>();
    m.config.n_heads = c.at("n_heads").get<int>();
    m.config.d_ff = c.at("d_ff").get<int>();
    m.config.max_seq_len = c.at("max_seq_len").get<int>();
    m.config.validate();
    m.seed = h.at("seed").get<std::uint64_t>();
    m.vocab = Vocabulary(h.at("vocab").get<std::vector<std::string>>());
    if (m.vocab.size() != static_cast<std::size_t>(m.config.vocab_size)) {
      throw IoError("checkpoint vocabulary size disagrees with config");
    }
    const ParamLayout layout(m.config);
    const auto count = h.at("weight_count").get<std::size_t>();
    if (count != layout.total) throw IoError("checkpoint weight_count disagrees with config");

    binary::Reader reader(bytes, nl + 1);
    if (reader.remaining() != count * 4) throw IoError("checkpoint payload has the wrong size");
    m.weights.resize(count);
    for (auto& w : m.weights) w = reader.f32();
    if (hex64(m.checksum()) != h.at("checksum").get<std::string>()) {
      throw IoError("checkpoint checksum mismatch");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed checkpoint header: ") + e.what());
  }
}

void save_checkpoint(const ModelParams& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(model));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace lol::toymodel
