#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "lol/engine/decode.hpp"
#include "lol/engine/math.hpp"
#include "lol/eval/metrics.hpp"
#include "lol/providers/replay.hpp"
#include "lol/toymodel/corpus.hpp"
#include "support/test_support.hpp"

using namespace lol;
using namespace lol::engine;
using lol::testing::Gen;
using lol::testing::max_abs_diff;

namespace {

using eval::ChoiceLabel;

FusionConfig random_config(Gen& gen, int n_layers) {
  FusionConfig c;
  c.omega = gen.uniform(0.01, 1.0);
  c.omega_prime = gen.coin(0.2) ? 0.0 : gen.uniform(0.0, 1.0);
  c.lambda = gen.uniform(0.0, 1.0);
  c.lambda_prime = gen.uniform(0.0, 1.0);
  c.lambda_dprime = gen.uniform(0.0, 1.0);
  c.exit_layer = static_cast<LayerIndex>(gen.integer(1, n_layers));
  c.instruction = "7 8 9";
  c.concat_order = gen.coin() ? ConcatOrder::instruction_first : ConcatOrder::context_first;
  return c;
}

// A random MC fixture with one best, 0..3 further correct and 1..4 incorrect answers.
struct McFixture {
  std::vector<double> scores;
  std::vector<ChoiceLabel> labels;
};

McFixture random_mc(Gen& gen) {
  McFixture f;
  f.labels.push_back(ChoiceLabel::best);
  const long n_correct = gen.integer(0, 3);
  const long n_incorrect = gen.integer(1, 4);
  for (long i = 0; i < n_correct; ++i) f.labels.push_back(ChoiceLabel::correct);
  for (long i = 0; i < n_incorrect; ++i) f.labels.push_back(ChoiceLabel::incorrect);
  std::shuffle(f.labels.begin(), f.labels.end(), gen.engine());
  const double offset = gen.uniform(-40.0, 0.0);
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    // Round to a coarse grid so ties occur with non-trivial probability.
    f.scores.push_back(offset + std::round(gen.uniform(-8.0, 0.0) * 4.0) / 4.0);
  }
  return f;
}

int oracle_mc1(const McFixture& f) {
  double best = 0.0;
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    if (f.labels[i] == ChoiceLabel::best) best = f.scores[i];
  }
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    if (f.labels[i] != ChoiceLabel::best && f.scores[i] >= best) return 0;
  }
  return 1;
}

long double oracle_mc2(const McFixture& f) {
  long double good = 0.0L, all = 0.0L;
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    const long double p = std::exp(static_cast<long double>(f.scores[i]));
    all += p;
    if (f.labels[i] != ChoiceLabel::incorrect) good += p;
  }
  return good / all;
}

double oracle_mc3(const McFixture& f) {
  std::vector<double> good, bad;
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    (f.labels[i] == ChoiceLabel::incorrect ? bad : good).push_back(f.scores[i]);
  }
  const double top_bad = *std::max_element(bad.begin(), bad.end());
  const auto above = std::count_if(good.begin(), good.end(), [&](double s) { return s > top_bad; });
  return static_cast<double>(above) / static_cast<double>(good.size());
}

}  // namespace

TEST_SUITE("normalization properties") {
  TEST_CASE("log_softmax matches the extended-precision oracle and normalizes") {
    Gen gen(101);
    for (int trial = 0; trial < 500; ++trial) {
      const auto n = static_cast<std::size_t>(gen.integer(1, 80));
      auto x = gen.vector(n, gen.uniform(0.1, 30.0));
      const double offset = gen.uniform(-500.0, 500.0);
      for (auto& v : x) v += offset;
      const auto out = log_softmax(x);
      CHECK(max_abs_diff(out, lol::testing::oracle_log_softmax(x)) < 1e-12);
      CHECK(std::fabs(logsumexp(out)) < 1e-12);
      for (double v : out) CHECK(v <= 1e-15);
    }
  }

  TEST_CASE("log_softmax is invariant to a constant shift") {
    Gen gen(102);
    for (int trial = 0; trial < 300; ++trial) {
      const auto x = gen.vector(static_cast<std::size_t>(gen.integer(2, 60)));
      auto shifted = x;
      const double c = gen.uniform(-100.0, 100.0);
      for (auto& v : shifted) v += c;
      CHECK(max_abs_diff(log_softmax(x), log_softmax(shifted)) < 1e-12);
    }
  }

  TEST_CASE("softmax is a distribution whose argmax is the input argmax") {
    Gen gen(103);
    for (int trial = 0; trial < 300; ++trial) {
      const auto x = gen.vector(static_cast<std::size_t>(gen.integer(1, 60)));
      const auto p = softmax(x);
      CHECK(std::fabs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
      CHECK(std::all_of(p.begin(), p.end(), [](double v) { return v >= 0.0; }));
      CHECK(argmax(p) == argmax(x));
    }
  }

  TEST_CASE("contrast ignores per-model constant shifts") {
    Gen gen(104);
    for (int trial = 0; trial < 200; ++trial) {
      const auto n = static_cast<std::size_t>(gen.integer(2, 50));
      const auto a = gen.vector(n), b = gen.vector(n);
      auto a2 = a, b2 = b;
      const double sa = gen.uniform(-50.0, 50.0), sb = gen.uniform(-50.0, 50.0);
      for (auto& v : a2) v += sa;
      for (auto& v : b2) v += sb;
      const double coeff = gen.uniform(0.0, 1.0);
      CHECK(max_abs_diff(contrast(a, b, coeff).values, contrast(a2, b2, coeff).values) < 1e-12);
    }
  }
}

TEST_SUITE("decoding properties") {
  TEST_CASE("final scores regroup into the stage decomposition") {
    Gen gen(201);
    for (int trial = 0; trial < 200; ++trial) {
      const int n_layers = static_cast<int>(gen.integer(1, 6));
      const auto seed = static_cast<std::uint64_t>(gen.integer(0, 1 << 30));
      ContrastSession session(lol::testing::synthetic(seed, 30, n_layers),
                              lol::testing::synthetic(seed + 1, 30, n_layers), lol::testing::numeric_instruction);
      const auto config = random_config(gen, n_layers);
      const auto prefix = gen.tokens(static_cast<std::size_t>(gen.integer(1, 6)), 30);
      const auto step = lol_step(session, prefix, config);

      const std::vector<LayerIndex> layers{*config.exit_layer, static_cast<LayerIndex>(n_layers)};
      const auto base = session.base().query(prefix, layers);
      const auto amateur = session.amateur()->query(prefix, layers);
      const auto lb = log_softmax(base.at(n_layers)), la = log_softmax(amateur.at(n_layers));
      const auto eb = log_softmax(base.at(*config.exit_layer)), ea = log_softmax(amateur.at(*config.exit_layer));
      std::vector<double> expected(lb.size());
      for (std::size_t i = 0; i < lb.size(); ++i) {
        expected[i] = (lb[i] - config.lambda * la[i]) + config.omega * (eb[i] - config.lambda_prime * ea[i]);
        if (config.omega_prime > 0.0) expected[i] += config.omega_prime * step.refocus->values[i];
      }
      CHECK(max_abs_diff(step.final.values, expected) < 1e-9);
      CHECK(step.refocus.has_value() == (config.omega_prime > 0.0));
      const auto& p = step.distribution.probs;
      CHECK(std::fabs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
    }
  }

  TEST_CASE("lol_step is a pure function of session inputs and config") {
    Gen gen(202);
    for (int trial = 0; trial < 50; ++trial) {
      const auto seed = static_cast<std::uint64_t>(gen.integer(0, 1 << 30));
      auto make = [&] {
        return ContrastSession(lol::testing::synthetic(seed, 20), lol::testing::synthetic(seed + 7, 20),
                               lol::testing::numeric_instruction);
      };
      auto s1 = make(), s2 = make();
      const auto config = random_config(gen, 4);
      const auto prefix = gen.tokens(3, 20);
      lol_step(s1, gen.tokens(2, 20), config);  // unrelated traffic through the cache
      CHECK(lol_step(s1, prefix, config).final.values == lol_step(s2, prefix, config).final.values);
    }
  }

  TEST_CASE("greedy generation picks the argmax of each step") {
    Gen gen(203);
    for (int trial = 0; trial < 30; ++trial) {
      const auto seed = static_cast<std::uint64_t>(gen.integer(0, 1 << 30));
      ContrastSession session(lol::testing::synthetic(seed, 25), lol::testing::synthetic(seed + 3, 25),
                              lol::testing::numeric_instruction);
      const auto config = random_config(gen, 4);
      const auto prompt = gen.tokens(2, 25);
      const auto out = greedy_generate(session, prompt, config, 4);
      REQUIRE(out.size() == prompt.size() + 4);
      CHECK(TokenSequence(out.begin(), out.begin() + 2) == prompt);
      auto context = prompt;
      for (auto it = out.begin() + 2; it != out.end(); ++it) {
        const TokenId t = *it;
        CHECK(t == argmax(lol_step(session, context, config).distribution.probs));
        context.push_back(t);
      }
    }
  }
}

TEST_SUITE("metric properties") {
  TEST_CASE("metrics agree with independent oracles") {
    Gen gen(301);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto f = random_mc(gen);
      CHECK(eval::mc1(f.scores, f.labels) == oracle_mc1(f));
      CHECK(std::fabs(eval::mc2(f.scores, f.labels) - static_cast<double>(oracle_mc2(f))) < 1e-12);
      CHECK(eval::mc3(f.scores, f.labels) == oracle_mc3(f));
      const double boolean = eval::mc2(f.scores, f.labels, eval::Mc2Mode::boolean);
      CHECK(boolean == (oracle_mc2(f) > 0.5L ? 1.0 : 0.0));
    }
  }

  TEST_CASE("metrics are invariant to choice order and a common score shift") {
    Gen gen(302);
    for (int trial = 0; trial < 500; ++trial) {
      const auto f = random_mc(gen);
      std::vector<std::size_t> order(f.labels.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), gen.engine());
      McFixture g;
      const double shift = std::round(gen.uniform(-20.0, 20.0));
      for (std::size_t i : order) {
        g.scores.push_back(f.scores[i] + shift);
        g.labels.push_back(f.labels[i]);
      }
      CHECK(eval::mc1(f.scores, f.labels) == eval::mc1(g.scores, g.labels));
      CHECK(eval::mc3(f.scores, f.labels) == eval::mc3(g.scores, g.labels));
      CHECK(std::fabs(eval::mc2(f.scores, f.labels) - eval::mc2(g.scores, g.labels)) < 1e-12);
    }
  }

  TEST_CASE("metrics stay within their ranges and mc1 implies a full mc3") {
    Gen gen(303);
    for (int trial = 0; trial < 500; ++trial) {
      const auto f = random_mc(gen);
      const double m2 = eval::mc2(f.scores, f.labels);
      const double m3 = eval::mc3(f.scores, f.labels);
      CHECK(m2 >= 0.0);
      CHECK(m2 <= 1.0);
      CHECK(m3 >= 0.0);
      CHECK(m3 <= 1.0);
      if (eval::mc1(f.scores, f.labels) == 1) CHECK(m3 > 0.0);
    }
  }
}

TEST_SUITE("replay properties") {
  TEST_CASE("random archives round-trip through their byte form") {
    Gen gen(401);
    for (int trial = 0; trial < 100; ++trial) {
      providers::ReplayHeader h;
      h.vocab_size = static_cast<int>(gen.integer(1, 20));
      h.n_layers = static_cast<int>(gen.integer(1, 6));
      for (LayerIndex l = 1; l <= h.n_layers; ++l) {
        if (gen.coin() || (l == h.n_layers && h.layers.empty())) h.layers.push_back(l);
      }
      h.source = "prop-" + std::to_string(trial);
      std::vector<providers::ReplayRecord> records;
      std::set<TokenSequence> seen;
      const auto n = gen.integer(0, 12);
      for (long i = 0; i < n; ++i) {
        auto prefix = gen.tokens(static_cast<std::size_t>(gen.integer(1, 5)), h.vocab_size);
        if (!seen.insert(prefix).second) continue;
        providers::ReplayRecord r;
        r.prefix = prefix;
        for (std::size_t k = 0; k < h.layers.size(); ++k) {
          std::vector<float> row;
          for (int v = 0; v < h.vocab_size; ++v) row.push_back(static_cast<float>(gen.normal(0.0, 10.0)));
          r.values.push_back(row);
        }
        records.push_back(r);
      }
      const providers::ReplayArchive archive(h, records);
      const auto bytes = archive.serialize();
      const auto parsed = providers::ReplayArchive::parse(bytes);
      CHECK(parsed.serialize() == bytes);
      REQUIRE(parsed.records().size() == records.size());
      const providers::ReplayProvider replay(parsed);
      for (const auto& r : records) {
        const auto got = replay.query(r.prefix, h.layers);
        for (std::size_t k = 0; k < h.layers.size(); ++k) {
          const auto& row = got.at(h.layers[k]);
          for (std::size_t v = 0; v < row.size(); ++v) CHECK(row[v] == static_cast<double>(r.values[k][v]));
        }
      }
    }
  }
}

TEST_SUITE("corpus properties") {
  TEST_CASE("corruption changes exactly floor(fraction * N) objects within each relation pool") {
    Gen gen(501);
    toymodel::SyntheticCorpusOptions options;
    options.first_names = 6;
    options.last_names = 6;
    options.objects_per_relation = 4;
    const auto corpus = toymodel::make_synthetic_corpus(options);
    std::map<std::string, std::set<std::string>> pools;
    for (const auto& r : corpus.records) pools[r.relation].insert(r.object);
    for (int trial = 0; trial < 40; ++trial) {
      const double fraction = gen.uniform(0.01, 1.0);
      const auto out = toymodel::corrupt(corpus, fraction, static_cast<std::uint64_t>(trial));
      REQUIRE(out.size() == corpus.size());
      std::size_t changed = 0;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        CHECK(out.records[i].subject == corpus.records[i].subject);
        CHECK(pools[out.records[i].relation].count(out.records[i].object) == 1);
        changed += out.records[i].object != corpus.records[i].object ? 1 : 0;
      }
      CHECK(changed == static_cast<std::size_t>(std::floor(fraction * static_cast<double>(corpus.size()))));
    }
  }

  TEST_CASE("rendered facts decode back to their words") {
    const auto corpus = toymodel::make_synthetic_corpus(lol::testing::small_corpus_options());
    const auto vocab = toymodel::Vocabulary::from_words(corpus.words());
    for (const auto& r : corpus.records) {
      const auto tokens = toymodel::render_question(r, vocab);
      CHECK(tokens.front() == 0);
      CHECK(vocab.decode(TokenSequence(tokens.begin() + 1, tokens.end())) == toymodel::question_text(r));
    }
  }
}
