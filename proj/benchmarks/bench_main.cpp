#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <vector>

#include "lol/engine/decode.hpp"
#include "lol/engine/math.hpp"
#include "lol/eval/metrics.hpp"
#include "lol/providers/toy_provider.hpp"
#include "lol/toymodel/model.hpp"

namespace {

using namespace lol;

std::shared_ptr<const toymodel::ModelParams> default_model(std::uint64_t seed) {
  std::vector<std::string> words;
  for (int i = 0; i < 94; ++i) words.push_back("w" + std::to_string(i));
  auto vocab = toymodel::Vocabulary::from_words(words);
  toymodel::ModelConfig config;
  config.vocab_size = static_cast<int>(vocab.size());
  return std::make_shared<const toymodel::ModelParams>(toymodel::init_params(config, std::move(vocab), seed));
}

TokenSequence prefix_of(std::size_t length, int vocab) {
  std::mt19937_64 rng(length);
  TokenSequence out(length);
  for (auto& t : out) t = static_cast<TokenId>(rng() % static_cast<std::uint64_t>(vocab));
  return out;
}

void BM_log_softmax(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 3.0);
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (auto& v : x) v = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(engine::log_softmax(x));
}
BENCHMARK(BM_log_softmax)->Arg(96)->Arg(32000);

void BM_forward_layered(benchmark::State& state) {
  const auto model = default_model(1);
  const auto prefix = prefix_of(static_cast<std::size_t>(state.range(0)), model->config.vocab_size);
  const std::vector<LayerIndex> layers{3, 4};
  for (auto _ : state) benchmark::DoNotOptimize(toymodel::forward_layered(*model, prefix, layers));
}
BENCHMARK(BM_forward_layered)->Arg(4)->Arg(8)->Arg(12);

// One full decode step with a cold session cache, so every provider query runs.
void BM_lol_step(benchmark::State& state) {
  auto base = std::make_shared<providers::ToyProvider>(default_model(1));
  auto amateur = std::make_shared<providers::ToyProvider>(default_model(2));
  const auto preset = static_cast<engine::Preset>(state.range(0));
  engine::FusionConfig config;
  config.preset = preset;
  config.instruction = "w1 w2";
  const auto vocab = base->model().vocab;
  engine::ContrastSession session(base, amateur, [vocab](std::string_view text) { return vocab.encode(text); });
  const auto prefix = prefix_of(6, base->vocab_size());
  for (auto _ : state) {
    session.clear_cache();
    benchmark::DoNotOptimize(engine::lol_step(session, prefix, config));
  }
  state.SetLabel(std::string(engine::to_string(preset)));
}
BENCHMARK(BM_lol_step)
    ->Arg(static_cast<int>(engine::Preset::greedy))
    ->Arg(static_cast<int>(engine::Preset::icd))
    ->Arg(static_cast<int>(engine::Preset::lol));

void BM_mc2(benchmark::State& state) {
  using L = eval::ChoiceLabel;
  const std::vector<double> scores{-1.0, -2.0, -1.5, -3.0, -2.5, -4.0};
  const std::vector<L> labels{L::best, L::correct, L::incorrect, L::incorrect, L::correct, L::incorrect};
  for (auto _ : state) benchmark::DoNotOptimize(eval::mc2(scores, labels));
}
BENCHMARK(BM_mc2);

}  // namespace

BENCHMARK_MAIN();
