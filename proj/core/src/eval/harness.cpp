#include "lol/eval/harness.hpp"

#include <charconv>
#include <cstdio>

#include "lol/error.hpp"

namespace lol::eval {

namespace {

TokenSequence parse_ids(std::string_view text) {
  TokenSequence out;
  for (const auto& w : split_words(text)) {
    TokenId id = 0;
    auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), id);
    if (ec != std::errc() || p != w.data() + w.size()) {
      throw ValidationError("'" + w + "' is not a token id");
    }
    out.push_back(id);
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

SweepRow run_row(engine::ContrastSession& session, const std::vector<McItem>& items,
                 const engine::FusionConfig& config, const TextCodec& codec, double key) {
  const auto report = evaluate_mc(items, make_scorer(session, config, codec));
  return {key, *report.mc1, *report.mc2, *report.mc3};
}

}  // namespace

TokenSequence VocabularyCodec::prompt(std::string_view text) const {
  TokenSequence out{toymodel::Vocabulary::kBos};
  const auto words = vocab_.encode(text);
  out.insert(out.end(), words.begin(), words.end());
  return out;
}

TokenSequence VocabularyCodec::continuation(std::string_view text) const { return vocab_.encode(text); }

TokenSequence VocabularyCodec::instruction(std::string_view text) const { return vocab_.encode(text); }

TokenSequence NumericCodec::prompt(std::string_view text) const { return parse_ids(text); }
TokenSequence NumericCodec::continuation(std::string_view text) const { return parse_ids(text); }
TokenSequence NumericCodec::instruction(std::string_view text) const { return parse_ids(text); }

engine::InstructionEncoder instruction_encoder(std::shared_ptr<const TextCodec> codec) {
  return [codec = std::move(codec)](std::string_view text) { return codec->instruction(text); };
}

Scorer make_scorer(engine::ContrastSession& session, const engine::FusionConfig& config,
                   const TextCodec& codec) {
  return [&session, config, &codec](std::string_view prompt, std::string_view continuation) {
    return engine::score_continuation(session, codec.prompt(prompt), codec.continuation(continuation),
                                      config);
  };
}

std::string config_fingerprint(const engine::FusionConfig& config,
                               const engine::ContrastSession& session) {
  std::string text = engine::to_config_text(config);
  text += "base=" + session.base().identity() + "\n";
  if (session.amateur()) text += "amateur=" + session.amateur()->identity() + "\n";
  return hex64(fnv1a64(text.data(), text.size()));
}

std::vector<SweepRow> sweep_layers(engine::ContrastSession& session, const std::vector<McItem>& items,
                                   const engine::FusionConfig& config,
                                   std::span<const LayerIndex> layers, const TextCodec& codec) {
  for (LayerIndex l : layers) {
    if (l < 1 || l > session.n_layers()) {
      throw ValidationError("sweep layer " + std::to_string(l) + " outside [1, " +
                            std::to_string(session.n_layers()) + "]");
    }
  }
  std::vector<SweepRow> rows;
  auto baseline = config;
  baseline.preset = engine::Preset::icd;
  rows.push_back(run_row(session, items, baseline, codec, 0.0));
  for (LayerIndex l : layers) {
    auto c = config;
    c.preset = engine::Preset::lol;
    c.multi_layer_fusion = true;
    c.omega_prime = 0.0;
    c.exit_layer = l;
    rows.push_back(run_row(session, items, c, codec, static_cast<double>(l)));
  }
  return rows;
}

std::vector<SweepRow> sweep_omega_prime(engine::ContrastSession& session,
                                        const std::vector<McItem>& items,
                                        const engine::FusionConfig& config,
                                        std::span<const double> values, const TextCodec& codec) {
  for (double v : values) {
    if (!(v > 0.0 && v <= 1.0)) throw ValidationError("omega_prime sweep values must be in (0, 1]");
  }
  std::vector<SweepRow> rows;
  auto c = config;
  c.preset = engine::Preset::lol;
  c.omega_prime = 0.0;
  rows.push_back(run_row(session, items, c, codec, 0.0));
  for (double v : values) {
    c.omega_prime = v;
    rows.push_back(run_row(session, items, c, codec, v));
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, std::string_view key_name) {
  std::string out = std::string(key_name) + ",mc1,mc2,mc3\n";
  for (const auto& r : rows) {
    out += fmt(r.key) + "," + fmt(r.mc1) + "," + fmt(r.mc2) + "," + fmt(r.mc3) + "\n";
  }
  return out;
}

}  // namespace lol::eval
