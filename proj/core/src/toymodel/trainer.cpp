#include "lol/toymodel/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lol/error.hpp"
#include "transformer_ops.hpp"

namespace lol::toymodel {

namespace {

// Cross-entropy of next-token predictions at positions 0..T-2. Writes
// (softmax - onehot) * scale into dlogits when it is non-null.
double sequence_loss(const detail::Activations& a, const TokenSequence& seq, int V, float scale,
                     std::vector<float>* dlogits) {
  const int T = a.length;
  if (dlogits) dlogits->assign(static_cast<std::size_t>(T) * V, 0.0f);
  double loss = 0.0;
  for (int t = 0; t + 1 < T; ++t) {
    const float* row = a.logits.data() + static_cast<std::size_t>(t) * V;
    const float mx = *std::max_element(row, row + V);
    double sum = 0.0;
    for (int j = 0; j < V; ++j) sum += std::exp(static_cast<double>(row[j] - mx));
    const double lse = static_cast<double>(mx) + std::log(sum);
    const TokenId target = seq[static_cast<std::size_t>(t) + 1];
    loss += lse - static_cast<double>(row[target]);
    if (dlogits) {
      float* drow = dlogits->data() + static_cast<std::size_t>(t) * V;
      for (int j = 0; j < V; ++j) {
        drow[j] = static_cast<float>(std::exp(static_cast<double>(row[j]) - lse)) * scale;
      }
      drow[target] -= scale;
    }
  }
  return loss;
}

void check_sequences(const ModelParams& model, const std::vector<TokenSequence>& seqs) {
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (seqs[i].size() < 2) {
      throw IngestionError("training sequence " + std::to_string(i) + " has fewer than 2 tokens");
    }
    if (seqs[i].size() > static_cast<std::size_t>(model.config.max_seq_len)) {
      throw IngestionError("training sequence " + std::to_string(i) + " has " +
                           std::to_string(seqs[i].size()) + " tokens, max_seq_len is " +
                           std::to_string(model.config.max_seq_len));
    }
    for (TokenId t : seqs[i]) {
      if (t >= static_cast<TokenId>(model.config.vocab_size)) {
        throw IngestionError("training sequence " + std::to_string(i) + " has out-of-vocabulary id " +
                             std::to_string(t));
      }
    }
  }
}

void check_vocabulary(const Vocabulary& vocab, const FactCorpus& corpus, const std::string& instruction) {
  auto words = corpus.words();
  for (auto& w : split_words(instruction)) words.push_back(std::move(w));
  for (const auto& w : words) {
    if (!vocab.contains(w)) {
      throw ValidationError("vocabulary mismatch: word '" + w + "' is not in the base vocabulary");
    }
  }
}

}  // namespace

TrainHyper default_finetune_hyper() {
  TrainHyper h;
  h.epochs = 3;
  h.learning_rate = 1e-3f;
  h.shuffle_seed = 29;
  return h;
}

double mean_loss(const ModelParams& model, const std::vector<TokenSequence>& sequences) {
  if (sequences.empty()) return 0.0;
  check_sequences(model, sequences);
  const ParamLayout layout(model.config);
  detail::Activations acts;
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& seq : sequences) {
    detail::forward(model, layout, seq.data(), static_cast<int>(seq.size()), acts, true);
    total += sequence_loss(acts, seq, model.config.vocab_size, 0.0f, nullptr);
    count += seq.size() - 1;
  }
  return total / static_cast<double>(count);
}

TrainReport train_sequences(ModelParams& model, const std::vector<TokenSequence>& train,
                            const std::vector<TokenSequence>& held_out, const TrainHyper& hyper) {
  if (train.empty()) throw ValidationError("training set is empty");
  if (hyper.epochs < 0 || hyper.batch_size <= 0 || !(hyper.learning_rate > 0.0f)) {
    throw ValidationError("invalid training hyperparameters");
  }
  check_sequences(model, train);

  TrainReport report;
  report.initial_heldout_loss = mean_loss(model, held_out);
  if (!std::isfinite(report.initial_heldout_loss)) {
    throw TrainingDivergedError("initial held-out loss is not finite");
  }

  const ParamLayout layout(model.config);
  const int V = model.config.vocab_size;
  std::vector<float> grads(model.weights.size()), m(model.weights.size(), 0.0f),
      v(model.weights.size(), 0.0f), dlogits;
  detail::Activations acts;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(hyper.shuffle_seed ^ (model.seed * 0x9e3779b97f4a7c15ULL));

  long step = 0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hyper.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch_size));
      std::size_t batch_tokens = 0;
      for (std::size_t i = start; i < end; ++i) batch_tokens += train[order[i]].size() - 1;
      const float scale = 1.0f / static_cast<float>(batch_tokens);

      std::fill(grads.begin(), grads.end(), 0.0f);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& seq = train[order[i]];
        detail::forward(model, layout, seq.data(), static_cast<int>(seq.size()), acts, true);
        batch_loss += sequence_loss(acts, seq, V, scale, &dlogits);
        detail::backward(model, layout, seq.data(), acts, dlogits, grads);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingDivergedError("non-finite loss at step " + std::to_string(step));
      }
      epoch_loss += batch_loss;
      epoch_tokens += batch_tokens;

      double norm2 = 0.0;
      for (float g : grads) norm2 += static_cast<double>(g) * g;
      const double norm = std::sqrt(norm2);
      const float clip = (hyper.grad_clip > 0.0f && norm > hyper.grad_clip)
                             ? static_cast<float>(hyper.grad_clip / norm)
                             : 1.0f;

      ++step;
      const float bc1 = 1.0f - std::pow(hyper.beta1, static_cast<float>(step));
      const float bc2 = 1.0f - std::pow(hyper.beta2, static_cast<float>(step));
      for (std::size_t i = 0; i < model.weights.size(); ++i) {
        const float g = grads[i] * clip;
        m[i] = hyper.beta1 * m[i] + (1.0f - hyper.beta1) * g;
        v[i] = hyper.beta2 * v[i] + (1.0f - hyper.beta2) * g * g;
        const float mhat = m[i] / bc1;
        const float vhat = v[i] / bc2;
        model.weights[i] -= hyper.learning_rate * mhat / (std::sqrt(vhat) + hyper.adam_eps);
      }
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(epoch_tokens));
  }
  report.steps = step;
  report.final_heldout_loss = mean_loss(model, held_out);
  if (!std::isfinite(report.final_heldout_loss) || !model.all_finite()) {
    throw TrainingDivergedError("training diverged: non-finite weights or loss");
  }
  return report;
}

namespace {

// splitmix64 finalizer; decorrelates the instruction choice from corpus order.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<TokenSequence> render_training_set(const std::vector<FactRecord>& records,
                                               const Vocabulary& vocab, const TrainHyper& hyper,
                                               int max_seq_len) {
  const TokenSequence instruction = vocab.encode(hyper.instruction);
  std::vector<TokenSequence> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    TokenSequence seq;
    if (hyper.instruction_period > 0 &&
        mix(i) % static_cast<std::uint64_t>(hyper.instruction_period) == 0) {
      seq = instruction;
    }
    const auto fact = render_fact(records[i], vocab);
    seq.insert(seq.end(), fact.begin(), fact.end());
    if (seq.size() > static_cast<std::size_t>(max_seq_len)) {
      const auto& r = records[i];
      throw IngestionError("record '" + r.subject + " | " + r.relation + " | " + r.object +
                           "' renders to " + std::to_string(seq.size()) +
                           " tokens, exceeding max_seq_len " + std::to_string(max_seq_len));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

namespace {

std::vector<TokenSequence> render_held_out(const std::vector<FactRecord>& records,
                                           const Vocabulary& vocab, const TrainHyper& hyper,
                                           int max_seq_len) {
  TrainHyper plain = hyper;
  plain.instruction_period = 0;
  return render_training_set(records, vocab, plain, max_seq_len);
}

}  // namespace

TrainResult train_base(const FactCorpus& corpus, ModelConfig shape, const TrainHyper& hyper,
                       std::uint64_t seed) {
  if (corpus.empty()) throw ValidationError("corpus is empty");
  auto vocab = Vocabulary::from_words(corpus.words(), split_words(hyper.instruction));
  const int derived = static_cast<int>(vocab.size());
  if (shape.vocab_size != 0 && shape.vocab_size != derived) {
    throw ValidationError("config vocab_size " + std::to_string(shape.vocab_size) +
                          " does not match corpus vocabulary size " + std::to_string(derived));
  }
  shape.vocab_size = derived;
  shape.validate();

  const auto train = render_training_set(corpus.select(Split::train), vocab, hyper, shape.max_seq_len);
  const auto held = render_held_out(corpus.select(Split::held_out), vocab, hyper, shape.max_seq_len);

  TrainResult result{init_params(shape, std::move(vocab), seed), {}};
  if (train.empty()) throw ValidationError("corpus has no train-split records");
  result.report = train_sequences(result.params, train, held, hyper);
  return result;
}

TrainResult finetune_amateur(const ModelParams& base, const FactCorpus& corpus,
                             const TrainHyper& hyper) {
  if (corpus.empty()) throw ValidationError("fine-tune corpus is empty");
  check_vocabulary(base.vocab, corpus, hyper.instruction);
  const int max_len = base.config.max_seq_len;
  const auto train = render_training_set(corpus.select(Split::train), base.vocab, hyper, max_len);
  const auto held = render_held_out(corpus.select(Split::held_out), base.vocab, hyper, max_len);
  if (train.empty()) throw ValidationError("fine-tune corpus has no train-split records");

  TrainResult result{base, {}};
  result.report = train_sequences(result.params, train, held, hyper);
  return result;
}

double object_accuracy(const ModelParams& model, const std::vector<FactRecord>& records) {
  if (records.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : records) {
    const auto logits = final_logits(model, render_question(r, model.vocab));
    const auto best = static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == model.vocab.encode(r.object).front()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

}  // namespace lol::toymodel
