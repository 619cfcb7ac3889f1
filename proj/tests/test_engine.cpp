#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "lol/atomic_file.hpp"
#include "lol/engine/decode.hpp"
#include "lol/engine/fusion_config.hpp"
#include "lol/engine/math.hpp"
#include "lol/engine/session.hpp"
#include "lol/error.hpp"
#include "lol/providers/toy_provider.hpp"
#include "lol/toymodel/trainer.hpp"
#include "support/test_support.hpp"

using namespace lol;
using namespace lol::engine;
using lol::testing::max_abs_diff;
using lol::testing::synthetic;

namespace {

// Returns the same per-layer vectors for every prefix.
class TableProvider final : public providers::LogitProvider {
 public:
  TableProvider(LayeredLogits table, int n_layers, std::size_t max_context = 0) : table_(std::move(table)) {
    info_.identity = "table";
    info_.vocab_size = static_cast<int>(table_.begin()->second.size());
    info_.n_layers = n_layers;
    info_.arbitrary_prefixes = true;
    info_.max_context = max_context;
  }
  const providers::ProviderInfo& info() const noexcept override { return info_; }
  LayeredLogits query(const TokenSequence&, std::span<const LayerIndex> layers) const override {
    providers::validate_layers(info_, layers);
    LayeredLogits out;
    for (auto l : layers) out[l] = table_.at(l);
    return out;
  }

 private:
  LayeredLogits table_;
  providers::ProviderInfo info_;
};

ContrastSession synthetic_session(std::uint64_t seed, int vocab = 50, int layers = 4) {
  return ContrastSession(synthetic(seed, vocab, layers), synthetic(seed + 1000, vocab, layers),
                         lol::testing::numeric_instruction);
}

FusionConfig numeric_config() {
  FusionConfig c;
  c.instruction = "7 8 9";
  return c;
}

}  // namespace

TEST_SUITE("math") {
  TEST_CASE("log_softmax worked examples") {
    const std::vector<double> zeros{0.0, 0.0}, huge{1000.0, 1000.0}, one_zero{1.0, 0.0};
    for (double v : log_softmax(zeros)) CHECK(std::fabs(v + std::log(2.0)) < 1e-15);
    for (double v : log_softmax(huge)) CHECK(std::fabs(v + std::log(2.0)) < 1e-15);
    const auto ls = log_softmax(one_zero);
    // -log(1 + e^-1) and -1 - log(1 + e^-1)
    CHECK(ls[0] == doctest::Approx(-0.3133).epsilon(1e-4));
    CHECK(ls[1] == doctest::Approx(-1.3133).epsilon(1e-4));
    CHECK(ls[0] == doctest::Approx(-std::log1p(std::exp(-1.0))).epsilon(1e-14));
  }

  TEST_CASE("log_softmax normalizes and rejects non-finite input") {
    lol::testing::Gen gen(4);
    for (int i = 0; i < 50; ++i) {
      const auto raw = gen.vector(static_cast<std::size_t>(gen.integer(1, 60)), 20.0);
      const auto ls = log_softmax(raw);
      long double total = 0.0L;
      for (double v : ls) total += std::exp(static_cast<long double>(v));
      CHECK(std::fabs(static_cast<double>(total) - 1.0) < 1e-12);
      CHECK(max_abs_diff(ls, lol::testing::oracle_log_softmax(raw)) < 1e-12);
    }
    const std::vector<double> bad{0.0, std::numeric_limits<double>::infinity()};
    const std::vector<double> nan{std::nan("")};
    const std::vector<double> empty{};
    CHECK_THROWS_AS(log_softmax(bad), ValidationError);
    CHECK_THROWS_AS(log_softmax(nan), ValidationError);
    CHECK_THROWS_AS(log_softmax(empty), ValidationError);
  }

  TEST_CASE("softmax and argmax") {
    const std::vector<double> raw{2.0, 5.0, 5.0, -1.0};
    const auto p = softmax(raw);
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(argmax(raw) == 1);
    const std::vector<double> flat{0.0, 0.0, 0.0};
    CHECK(argmax(flat) == 0);
  }
}

TEST_SUITE("combinators") {
  TEST_CASE("contrast") {
    const std::vector<double> a{1.0, 0.0}, b{0.0, 1.0};
    const auto c = contrast(a, b, 1.0);
    CHECK(c.name == StageName::final_contrast);
    CHECK(c.values[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.values[1] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(contrast(a, b, 0.0).values == log_softmax(a));
    for (double v : contrast(a, a, 1.0).values) CHECK(v == 0.0);
    const std::vector<double> longer{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(contrast(a, longer, 1.0), ValidationError);
  }

  TEST_CASE("fuse_multilayer") {
    const ContrastStage f_t{StageName::final_contrast, {1.0, -1.0}};
    const ContrastStage f_exit{StageName::exit_contrast, {0.5, 0.5}};
    const auto fused = fuse_multilayer(f_t, f_exit, 0.5);
    CHECK(fused.name == StageName::fused);
    CHECK(fused.values == std::vector<double>{1.25, -0.75});
    CHECK_THROWS_AS(fuse_multilayer(f_t, f_exit, 0.0), ValidationError);
    CHECK_THROWS_AS(fuse_multilayer(f_t, f_exit, 1.5), ValidationError);
    const ContrastStage shorter{StageName::exit_contrast, {0.5}};
    CHECK_THROWS_AS(fuse_multilayer(f_t, shorter, 0.5), ValidationError);
  }

  TEST_CASE("refocus on identical providers is zero") {
    const auto p = synthetic(3);
    ContrastSession session(p, p, lol::testing::numeric_instruction);
    const auto stage = refocus(session, {1, 2}, {7, 8}, 1.0);
    CHECK(stage.name == StageName::refocus);
    for (double v : stage.values) CHECK(v == 0.0);
  }

  TEST_CASE("refocus queries the joined context in the configured order") {
    auto session = synthetic_session(5);
    const TokenSequence prefix{1, 2}, instruction{7, 8};
    const LayerIndex top = 4;
    const auto expect = [&](const TokenSequence& joined) {
      const auto b = session.base().query(joined, std::span(&top, 1)).at(top);
      const auto a = session.amateur()->query(joined, std::span(&top, 1)).at(top);
      return contrast(b, a, 0.7).values;
    };
    CHECK(refocus(session, prefix, instruction, 0.7).values == expect({7, 8, 1, 2}));
    CHECK(refocus(session, prefix, instruction, 0.7, ConcatOrder::context_first).values == expect({1, 2, 7, 8}));
    CHECK_THROWS_AS(refocus(session, prefix, {}, 1.0), ValidationError);
  }

  TEST_CASE("refocus reports context overflow") {
    auto base = std::make_shared<lol::testing::SyntheticProvider>(1, 10, 2, 3.0, nullptr, 4);
    ContrastSession session(base, base, lol::testing::numeric_instruction);
    CHECK_THROWS_AS(refocus(session, {1, 2, 3}, {4, 5}, 1.0), ContextOverflowError);
  }
}

TEST_SUITE("fusion config") {
  TEST_CASE("defaults and exit layer resolution") {
    const FusionConfig c;
    CHECK(c.omega == 0.5);
    CHECK(c.omega_prime == 0.5);
    CHECK(c.lambda == 1.0);
    CHECK(c.lambda_prime == 1.0);
    CHECK(c.lambda_dprime == 1.0);
    CHECK(c.preset == Preset::lol);
    CHECK(resolved_exit_layer(c, 4) == 3);
    CHECK(resolved_exit_layer(c, 1) == 1);
    FusionConfig explicit_exit;
    explicit_exit.exit_layer = 2;
    CHECK(resolved_exit_layer(explicit_exit, 4) == 2);
  }

  TEST_CASE("validation") {
    const auto bad = [](auto mutate) {
      FusionConfig c;
      mutate(c);
      return c;
    };
    CHECK_NOTHROW(validate(FusionConfig{}, 4));
    CHECK_THROWS_AS(validate(bad([](FusionConfig& c) { c.omega = 0.0; })), ValidationError);
    CHECK_THROWS_AS(validate(bad([](FusionConfig& c) { c.omega = 1.01; })), ValidationError);
    CHECK_THROWS_AS(validate(bad([](FusionConfig& c) { c.omega_prime = -0.1; })), ValidationError);
    CHECK_THROWS_AS(validate(bad([](FusionConfig& c) { c.lambda = 1.5; })), ValidationError);
    CHECK_THROWS_AS(validate(bad([](FusionConfig& c) { c.lambda_prime = -1.0; })), ValidationError);
    CHECK_THROWS_AS(validate(bad([](FusionConfig& c) { c.lambda_dprime = 2.0; })), ValidationError);
    CHECK_THROWS_AS(validate(bad([](FusionConfig& c) { c.instruction = " "; })), ValidationError);
    CHECK_NOTHROW(validate(bad([](FusionConfig& c) {
      c.instruction = "";
      c.omega_prime = 0.0;
    })));
    CHECK_THROWS_AS(validate(bad([](FusionConfig& c) { c.exit_layer = 5; }), 4), ValidationError);
    CHECK_THROWS_AS(validate(bad([](FusionConfig& c) { c.exit_layer = 0; }), 4), ValidationError);
  }

  TEST_CASE("text form round-trips and rejects unknown keys") {
    FusionConfig c;
    c.omega = 0.3;
    c.omega_prime = 0.1;
    c.lambda = 0.25;
    c.exit_layer = 2;
    c.instruction = "be factual :";
    c.preset = Preset::dola_like;
    c.score_normalization = ScoreNormalization::per_token;
    c.concat_order = ConcatOrder::context_first;
    c.multi_layer_fusion = false;
    c.plausibility_alpha = 0.125;
    const auto text = to_config_text(c);
    CHECK(parse_fusion_config(text) == c);
    CHECK(to_config_text(parse_fusion_config(text)) == text);

    const auto parsed = parse_fusion_config("# comment\n\nomega = 0.9  \n  preset=icd\nexit_layer = auto\n");
    CHECK(parsed.omega == 0.9);
    CHECK(parsed.preset == Preset::icd);
    CHECK_FALSE(parsed.exit_layer.has_value());

    CHECK_THROWS_AS(parse_fusion_config("omgea = 0.5\n"), ValidationError);
    CHECK_THROWS_AS(parse_fusion_config("omega = half\n"), ValidationError);
    CHECK_THROWS_AS(parse_fusion_config("omega 0.5\n"), ValidationError);
    CHECK_THROWS_AS(parse_fusion_config("preset = beam\n"), ValidationError);
    CHECK_THROWS_AS(load_fusion_config("/nonexistent/lol.cfg"), ValidationError);
  }

  TEST_CASE("config files load from disk") {
    const auto path = std::filesystem::temp_directory_path() / "lol_test_engine.cfg";
    write_file_atomic(path, "omega_prime = 0.7\nlambda_prime = 0.5\n");
    const auto c = load_fusion_config(path);
    CHECK(c.omega_prime == 0.7);
    CHECK(c.lambda_prime == 0.5);
    CHECK(c.omega == 0.5);
  }
}

TEST_SUITE("lol_step") {
  TEST_CASE("stages recombine into the final scores") {
    auto session = synthetic_session(11);
    const auto config = numeric_config();
    const auto step = lol_step(session, {1, 2, 3}, config);
    REQUIRE(step.final_contrast);
    REQUIRE(step.exit_contrast);
    REQUIRE(step.fused);
    REQUIRE(step.refocus);
    for (std::size_t i = 0; i < step.final.values.size(); ++i) {
      const double fused = step.final_contrast->values[i] + config.omega * step.exit_contrast->values[i];
      CHECK(std::fabs(step.fused->values[i] - fused) < 1e-12);
      CHECK(std::fabs(step.final.values[i] - (fused + config.omega_prime * step.refocus->values[i])) < 1e-12);
    }
    CHECK(max_abs_diff(step.distribution.log_probs, log_softmax(step.final.values)) < 1e-12);
    CHECK(step.distribution.provenance == config);
  }

  TEST_CASE("stage inputs come from the right providers and layers") {
    auto session = synthetic_session(12);
    auto config = numeric_config();
    config.lambda = 0.6;
    config.lambda_prime = 0.4;
    config.exit_layer = 2;
    const TokenSequence prefix{4, 4};
    const auto step = lol_step(session, prefix, config);
    const std::vector<LayerIndex> both{2, 4};
    const auto base = session.base().query(prefix, both);
    const auto amateur = session.amateur()->query(prefix, both);
    CHECK(step.final_contrast->values == contrast(base.at(4), amateur.at(4), 0.6).values);
    CHECK(step.exit_contrast->values == contrast(base.at(2), amateur.at(2), 0.4).values);
  }

  TEST_CASE("presets reduce to their baselines") {
    auto session = synthetic_session(13);
    const TokenSequence prefix{9};
    const std::vector<LayerIndex> layers{3, 4};
    const auto base = session.base().query(prefix, layers);
    const auto amateur = session.amateur()->query(prefix, layers);

    auto config = numeric_config();
    config.preset = Preset::greedy;
    auto step = lol_step(session, prefix, config);
    CHECK(max_abs_diff(step.final.values, log_softmax(base.at(4))) < 1e-12);
    CHECK_FALSE(step.final_contrast.has_value());

    config.preset = Preset::icd;
    step = lol_step(session, prefix, config);
    CHECK(max_abs_diff(step.distribution.probs, softmax(contrast(base.at(4), amateur.at(4), 1.0).values)) < 1e-12);
    CHECK_FALSE(step.exit_contrast.has_value());
    CHECK_FALSE(step.refocus.has_value());

    config.preset = Preset::dola_like;
    step = lol_step(session, prefix, config);
    CHECK(max_abs_diff(step.final.values, contrast(base.at(4), base.at(3), 1.0).values) < 1e-12);

    auto lol_off = numeric_config();
    lol_off.multi_layer_fusion = false;
    lol_off.omega_prime = 0.0;
    auto icd = numeric_config();
    icd.preset = Preset::icd;
    CHECK(max_abs_diff(lol_step(session, prefix, lol_off).distribution.probs,
                       lol_step(session, prefix, icd).distribution.probs) < 1e-12);
  }

  TEST_CASE("zero contrast coefficients give multi-layer self-fusion") {
    auto session = synthetic_session(14);
    auto config = numeric_config();
    config.lambda = config.lambda_prime = config.lambda_dprime = 0.0;
    config.omega_prime = 0.0;
    config.omega = 0.8;
    const TokenSequence prefix{2, 5};
    const auto step = lol_step(session, prefix, config);
    const auto base = session.base().query(prefix, std::vector<LayerIndex>{3, 4});
    const auto expect_top = log_softmax(base.at(4));
    const auto expect_exit = log_softmax(base.at(3));
    for (std::size_t i = 0; i < expect_top.size(); ++i) {
      CHECK(std::fabs(step.final.values[i] - (expect_top[i] + 0.8 * expect_exit[i])) < 1e-12);
    }
  }

  TEST_CASE("exit layer at the top scales F_t without moving its argmax") {
    lol::testing::Gen gen(15);
    for (int trial = 0; trial < 50; ++trial) {
      auto session = synthetic_session(100 + static_cast<std::uint64_t>(trial));
      auto config = numeric_config();
      config.exit_layer = 4;
      config.omega = gen.uniform(0.05, 1.0);
      config.lambda = config.lambda_prime = gen.uniform(0.0, 1.0);
      const auto step = lol_step(session, gen.tokens(3, 50), config);
      CHECK(argmax(step.fused->values) == argmax(step.final_contrast->values));
    }
  }

  TEST_CASE("configuration errors") {
    ContrastSession base_only(synthetic(1), nullptr, lol::testing::numeric_instruction);
    auto config = numeric_config();
    CHECK_THROWS_AS(lol_step(base_only, {1}, config), ConfigurationError);
    config.preset = Preset::icd;
    CHECK_THROWS_AS(lol_step(base_only, {1}, config), ConfigurationError);
    config.preset = Preset::greedy;
    CHECK_NOTHROW(lol_step(base_only, {1}, config));
    config.preset = Preset::dola_like;
    CHECK_NOTHROW(lol_step(base_only, {1}, config));

    CHECK_THROWS_AS(ContrastSession(synthetic(1, 50), synthetic(2, 40)), ConfigurationError);
    CHECK_THROWS_AS(ContrastSession(nullptr, synthetic(2)), ConfigurationError);
  }

  TEST_CASE("plausibility restriction keeps only tokens near the base maximum") {
    LayeredLogits base{{1, {0.0, 0.0, 0.0}}, {2, {4.0, 0.0, 3.9}}};
    LayeredLogits amateur{{1, {0.0, 0.0, 0.0}}, {2, {4.0, -5.0, 3.0}}};
    ContrastSession session(std::make_shared<TableProvider>(base, 2),
                            std::make_shared<TableProvider>(amateur, 2));
    FusionConfig config;
    config.preset = Preset::icd;
    // Unrestricted, the contrast favours token 1, which the base finds implausible.
    CHECK(argmax(lol_step(session, {0}, config).distribution.probs) == 1);
    config.plausibility_alpha = 0.1;
    const auto step = lol_step(session, {0}, config);
    CHECK(step.distribution.probs[1] == 0.0);
    CHECK(argmax(step.distribution.probs) == 2);
    CHECK(step.distribution.probs[0] + step.distribution.probs[2] == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("session memoizes provider answers") {
    auto session = synthetic_session(16);
    const auto config = numeric_config();
    const auto first = lol_step(session, {1, 2}, config);
    const auto calls = session.provider_calls();
    const auto second = lol_step(session, {1, 2}, config);
    CHECK(session.provider_calls() == calls);
    CHECK(first.distribution.probs == second.distribution.probs);
  }
}

TEST_SUITE("generation and scoring") {
  TEST_CASE("greedy_generate budget, ties and stops") {
    LayeredLogits flat{{1, {0.0, 0.0, 0.0, 0.0}}, {2, {0.0, 0.0, 0.0, 0.0}}};
    ContrastSession session(std::make_shared<TableProvider>(flat, 2), nullptr);
    FusionConfig config;
    config.preset = Preset::greedy;
    CHECK(greedy_generate(session, {3, 2}, config, 0) == TokenSequence{3, 2});
    // All scores tie, so the lowest id wins every step.
    CHECK(greedy_generate(session, {3}, config, 3) == TokenSequence{3, 0, 0, 0});
    const std::vector<TokenId> stop{0};
    CHECK(greedy_generate(session, {3}, config, 3, stop) == TokenSequence{3, 0});
  }

  TEST_CASE("generation overflow carries the partial output") {
    LayeredLogits table{{1, {0.0, 1.0}}};
    ContrastSession session(std::make_shared<TableProvider>(table, 1, 4), nullptr);
    FusionConfig config;
    config.preset = Preset::greedy;
    try {
      greedy_generate(session, {0, 0}, config, 5);
      FAIL("expected overflow");
    } catch (const ContextOverflowError& e) {
      // A 4-token context still admits one more step; the fifth token cannot.
      CHECK(e.partial() == TokenSequence{0, 0, 1, 1, 1});
    }
  }

  TEST_CASE("greedy decoding on the trained base reproduces memorized facts") {
    const auto& world = lol::testing::small_world();
    auto session = world.session(false);
    FusionConfig config;
    config.preset = Preset::greedy;
    const auto& vocab = world.base->vocab;
    const std::vector<TokenId> stop{toymodel::Vocabulary::kEnd};
    int hits = 0, total = 0;
    for (const auto& r : world.corpus.select(toymodel::Split::train)) {
      if (total == 40) break;
      const auto prompt = toymodel::render_question(r, vocab);
      const auto out = greedy_generate(session, prompt, config, 3, stop);
      const TokenSequence generated(out.begin() + static_cast<std::ptrdiff_t>(prompt.size()), out.end());
      hits += vocab.decode(generated) == r.object + " ." ? 1 : 0;
      ++total;
    }
    CHECK(hits == total);
  }

  TEST_CASE("score_continuation equals a manual chain of lol_step") {
    auto session = synthetic_session(17);
    const auto config = numeric_config();
    const TokenSequence prompt{1, 2}, continuation{5, 6, 7};
    double oracle = 0.0;
    TokenSequence prefix = prompt;
    for (TokenId t : continuation) {
      const auto step = lol_step(session, prefix, config);
      oracle += std::log(static_cast<long double>(step.distribution.probs[t]));
      prefix.push_back(t);
    }
    const double total = score_continuation(session, prompt, continuation, config);
    CHECK(std::fabs(total - oracle) < 1e-12);
    auto per_token = config;
    per_token.score_normalization = ScoreNormalization::per_token;
    CHECK(std::fabs(score_continuation(session, prompt, continuation, per_token) - total / 3.0) < 1e-12);
  }

  TEST_CASE("single-token continuation scores ln p under both normalizations") {
    auto session = synthetic_session(18);
    auto config = numeric_config();
    const auto p = lol_step(session, {3}, config).distribution.probs[9];
    CHECK(score_continuation(session, {3}, {9}, config) == doctest::Approx(std::log(p)).epsilon(1e-13));
    auto per_token = config;
    per_token.score_normalization = ScoreNormalization::per_token;
    CHECK(score_continuation(session, {3}, {9}, per_token) == score_continuation(session, {3}, {9}, config));
  }

  TEST_CASE("score_continuation input errors") {
    auto base = std::make_shared<lol::testing::SyntheticProvider>(1, 10, 2, 3.0, nullptr, 4);
    ContrastSession session(base, nullptr);
    FusionConfig config;
    config.preset = Preset::greedy;
    CHECK_THROWS_AS(score_continuation(session, {1}, {}, config), ValidationError);
    CHECK_THROWS_AS(score_continuation(session, {1, 2, 3}, {4, 5}, config), ContextOverflowError);
    CHECK_NOTHROW(score_continuation(session, {1, 2}, {4, 5}, config));
    CHECK_THROWS_AS(score_continuation(session, {1}, {10}, config), ValidationError);
  }
}

TEST_SUITE("instruction sensitivity") {
  // A toy base that answers x to a bare question but y when the question
  // follows the instruction; the amateur is the untrained initialization.
  TEST_CASE("refocus differs from the plain contrast on an instruction-sensitive model") {
    const std::string instruction{kDefaultInstruction};
    std::vector<std::string> words{"r", "x", "y"};
    for (int i = 0; i < 6; ++i) words.push_back("s" + std::to_string(i));
    const auto vocab = toymodel::Vocabulary::from_words(words, split_words(instruction));
    toymodel::ModelConfig config;
    config.vocab_size = static_cast<int>(vocab.size());
    config.n_layers = 2;
    config.d_model = 32;
    config.n_heads = 4;
    config.d_ff = 64;
    auto base = toymodel::init_params(config, vocab, 3);
    const auto amateur = std::make_shared<const toymodel::ModelParams>(base);

    std::vector<TokenSequence> train;
    for (int i = 0; i < 6; ++i) {
      const std::string s = "s" + std::to_string(i);
      train.push_back(vocab.encode("<bos> " + s + " r x ."));
      train.push_back(vocab.encode(instruction + " <bos> " + s + " r y ."));
    }
    toymodel::TrainHyper hyper;
    hyper.epochs = 150;
    hyper.batch_size = 4;
    toymodel::train_sequences(base, train, train, hyper);

    ContrastSession session(std::make_shared<providers::ToyProvider>(
                                std::make_shared<const toymodel::ModelParams>(base)),
                            std::make_shared<providers::ToyProvider>(amateur),
                            [vocab](std::string_view text) { return vocab.encode(text); });
    const auto prefix = vocab.encode("<bos> s2 r");
    const LayerIndex top = 2;
    const auto plain = session.base().query(prefix, std::span(&top, 1)).at(top);
    auto joined = vocab.encode(instruction);
    joined.insert(joined.end(), prefix.begin(), prefix.end());
    const auto instructed = session.base().query(joined, std::span(&top, 1)).at(top);
    REQUIRE(argmax(plain) == *vocab.find("x"));
    REQUIRE(argmax(instructed) == *vocab.find("y"));

    FusionConfig fusion;
    const auto step = lol_step(session, prefix, fusion);
    REQUIRE(step.refocus);
    CHECK(max_abs_diff(step.refocus->values, step.final_contrast->values) > 1e-3);
    CHECK(argmax(step.refocus->values) == *vocab.find("y"));
  }
}
