#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "hcner/corpus.hpp"
#include "hcner/docmem.hpp"
#include "hcner/intnet.hpp"
#include "hcner/sentrep.hpp"

namespace hcner {

struct ModelConfig {
  int word_dim = 100;
  IntNetConfig intnet;
  int hidden_main = 256;
  int hidden_sent = 128;

  SentenceMode sentence = SentenceMode::LabelAttention;
  int attn_kernel = 3;
  LabelInput label_input = LabelInput::Word;
  bool aux_label_loss = false;
  int label_samples = 200;

  bool document = true;
  Compatibility compat = Compatibility::Cosine;
  double lambda = 0.3;
  int max_memory = 500;  // 0 = unbounded
  bool exclude_self = false;

  double dropout = 0.5;
  Normalization norm;
  TagScheme scheme = TagScheme::BIOES;  // scheme used inside the model

  void validate() const;
};

enum class LrSchedule { Multiplicative, Inverse };

std::string_view to_string(LrSchedule s);
LrSchedule parse_lr_schedule(std::string_view name);

struct TrainConfig {
  ModelConfig model;
  int epochs = 30;
  int batch_size = 10;
  double lr0 = 0.015;
  double lr_decay = 0.05;
  LrSchedule schedule = LrSchedule::Multiplicative;
  double clip_norm = 5.0;  // <= 0 disables clipping
  std::uint64_t seed = 1;
  int min_freq = 1;

  std::string train_path;
  std::string dev_path;
  std::string test_path;
  std::string embeddings_path;

  void validate() const;
};

// Epoch e (0-based) trains with lr0 * (1 - decay)^e, or lr0 / (1 + decay * e).
double learning_rate(const TrainConfig& config, int epoch);

// Sets one field from its textual key and value. Throws ConfigError for
// unknown keys or unparsable values.
void apply_setting(TrainConfig& config, std::string_view key, std::string_view value);

// Every field as `key=value`, one per line, in a fixed order. Numbers are
// printed in their shortest round-trip form.
std::string to_kv(const TrainConfig& config);

// Reads `key=value` lines on top of `base`. Blank lines and lines starting
// with '#' are ignored.
TrainConfig parse_kv(std::istream& in, TrainConfig base = {});
TrainConfig parse_kv(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});

std::vector<std::string> config_keys();

}  // namespace hcner
