#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lol/common.hpp"
#include "lol/toymodel/corpus.hpp"
#include "lol/toymodel/model.hpp"

namespace lol::toymodel {

struct TrainHyper {
  int epochs = 8;
  int batch_size = 16;
  float learning_rate = 3e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.98f;
  float adam_eps = 1e-8f;
  float grad_clip = 1.0f;
  // About one in k training facts (chosen by a hash of its index) is
  // rendered with the instruction in front so the model learns to read
  // past it; 0 disables.
  int instruction_period = 3;
  std::string instruction{kDefaultInstruction};
  std::uint64_t shuffle_seed = 17;
};

// Defaults for building the amateur: fewer epochs, smaller steps.
TrainHyper default_finetune_hyper();

struct TrainReport {
  std::vector<double> epoch_loss;
  double initial_heldout_loss = 0.0;
  double final_heldout_loss = 0.0;
  long steps = 0;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

// Builds the vocabulary from the corpus plus the instruction words and
// trains a fresh model on the train split. `shape.vocab_size` may be 0
// (derived) or must equal the derived vocabulary size.
TrainResult train_base(const FactCorpus& corpus, ModelConfig shape, const TrainHyper& hyper,
                       std::uint64_t seed);

// Full fine-tune of a copy of `base` on the train split of `corpus`.
// Every corpus word must already be in the base vocabulary.
TrainResult finetune_amateur(const ModelParams& base, const FactCorpus& corpus,
                             const TrainHyper& hyper);

// Trains `model` in place on pre-tokenized sequences (next-token loss on
// every position). Held-out loss is measured before and after.
TrainReport train_sequences(ModelParams& model, const std::vector<TokenSequence>& train,
                            const std::vector<TokenSequence>& held_out, const TrainHyper& hyper);

// Mean next-token cross-entropy over all predicted positions.
double mean_loss(const ModelParams& model, const std::vector<TokenSequence>& sequences);

// Training sequences for the facts of one split, about one in
// `hyper.instruction_period` prefixed by the instruction. Throws
// IngestionError naming the first record longer than `max_seq_len`.
std::vector<TokenSequence> render_training_set(const std::vector<FactRecord>& records,
                                               const Vocabulary& vocab, const TrainHyper& hyper,
                                               int max_seq_len);

// Fraction of records whose greedy next token after the question is the
// first object word.
double object_accuracy(const ModelParams& model, const std::vector<FactRecord>& records);

}  // namespace lol::toymodel
