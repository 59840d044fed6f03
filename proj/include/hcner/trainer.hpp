#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "hcner/checkpoint.hpp"
#include "hcner/config.hpp"
#include "hcner/corpus.hpp"
#include "hcner/eval.hpp"
#include "hcner/model.hpp"

namespace hcner {

struct Datasets {
  Corpus train;
  Corpus dev;
  Corpus test;
};

// Reads the corpora named in the config (dev and test may be unset) and
// validates their tags.
Datasets load_datasets(const TrainConfig& config);

// Everything derived from data before the first parameter is drawn.
struct Prepared {
  ModelVocabs vocabs;
  Eigen::MatrixXf word_init;
  Eigen::MatrixXf label_init;  // empty unless label attention is on
  double embedding_coverage = 0.0;
};

// Word vocab: training words with frequency >= min_freq, then dev/test words
// found in the embedding file (first-seen order). Embedding rows come from
// the file when available.
Prepared prepare(const TrainConfig& config, const Datasets& data);

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double loss = 0.0;
  Counts dev;
  std::size_t memory_hits = 0;  // training tokens whose memory subset was non-empty
  double seconds = 0.0;         // training pass only, excludes dev scoring
};

struct TrainResult {
  Checkpoint best;  // best-dev model (the final one without a dev set)
  std::vector<EpochMetrics> history;
  int best_epoch = 0;  // 0 = the initial model
  double train_seconds = 0.0;
};

struct TrainHooks {
  std::function<void(const EpochMetrics&)> on_epoch;
};

TrainResult train(const TrainConfig& config, const Datasets& data, const TrainHooks& hooks = {});

// Global L2 norm of all gradients. Throws NumericError naming the first
// parameter with a non-finite gradient.
double gradient_norm(const ParamRegistry<float>& params);

// p <- p - lr * grad for every parameter, then clears the gradients.
void sgd_step(ParamRegistry<float>& params, double lr);

// Predicted tags for every sentence, as valid BIO.
std::vector<std::vector<std::string>> predict_corpus(const Model<float>& model, const Corpus& corpus);

// Gold tags of a corpus as BIO.
std::vector<std::vector<std::string>> gold_bio(const Corpus& corpus);

Evaluation evaluate_model(const Model<float>& model, const Corpus& corpus);

// Per-epoch rows, one line each, without timings so identical runs produce
// identical files.
void write_epoch_metrics(std::ostream& out, const std::vector<EpochMetrics>& history);

}  // namespace hcner
