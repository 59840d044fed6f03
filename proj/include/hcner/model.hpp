#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hcner/config.hpp"
#include "hcner/corpus.hpp"
#include "hcner/crf.hpp"
#include "hcner/docmem.hpp"
#include "hcner/intnet.hpp"
#include "hcner/nn.hpp"
#include "hcner/sentrep.hpp"

namespace hcner {

// Everything symbolic a model is built over.
struct ModelVocabs {
  Vocab words;         // rows of the word embedding matrix
  Vocab chars;         // character inventory of the training split
  Vocab memory_words;  // normalized training words; one inverted-index entry each
  TagSet tags;         // in the model's tag scheme
  std::vector<std::string> label_names;  // entity types then "O"
  std::vector<std::uint8_t> in_train;    // per word id
  std::vector<std::uint8_t> pretrained;  // per word id: row came from the embedding file
};

// Integer view of one sentence.
struct EncodedSentence {
  std::vector<int> words;
  std::vector<std::vector<int>> chars;
  std::vector<int> memory_keys;
  std::vector<int> tags;    // empty for unlabeled input
  std::vector<int> labels;  // label_names index per token (auxiliary loss)

  std::size_t size() const { return words.size(); }
};

// Tags are converted to the model scheme. Sentences whose tags are all empty
// are treated as unlabeled.
EncodedSentence encode_sentence(const Sentence& sentence, const ModelVocabs& vocabs, const ModelConfig& config);
std::vector<EncodedSentence> encode_corpus(const Corpus& corpus, const ModelVocabs& vocabs, const ModelConfig& config);

// Seed for the memory sample of an unseen sentence: a hash of its word ids.
std::uint64_t sentence_seed(const EncodedSentence& sentence);

struct ForwardOptions {
  bool training = false;
  Rng* dropout_rng = nullptr;          // required when training with dropout > 0
  std::uint64_t memory_seed = 0;       // seeds subset sampling when a word exceeds max_memory
  std::optional<std::size_t> first_slot;  // memory slot of token 0 for training sentences
};

template <class S>
struct Tape {
  std::vector<typename IntNet<S>::Cache> chars;
  Matrix<S> w;  // raw word embeddings
  Matrix<S> x;  // [w ; c]
  DropoutResult<S> x_drop;
  typename SentenceEncoder<S>::Cache sentence;
  Matrix<S> similarity;
  RowVector<S> s;
  Matrix<S> x_prime;
  BiLstmCache<S> lstm;
  Matrix<S> h;  // main encoder states before dropout
  DropoutResult<S> h_drop;
  std::vector<std::optional<MemoryResponse<S>>> memory;
  Matrix<S> g;
  Matrix<S> emissions;
  S aux_loss = 0;
  Matrix<S> d_confidence;
};

template <class S>
struct Diagnostics {
  Vector<S> beta;  // sentence attention (empty when the sentence level is off)
  RowVector<S> s;
  std::vector<std::vector<std::size_t>> memory_slots;  // queried subset per token
  std::vector<Vector<S>> memory_alpha;
  std::size_t memory_hits = 0;  // tokens with a non-empty subset
};

template <class S>
class Model {
 public:
  // `word_init` (|V| x word_dim) and `label_init` (labels x word_dim) replace
  // the random initialization when given.
  Model(ModelConfig config, ModelVocabs vocabs, Rng& rng, const Eigen::MatrixXf* word_init = nullptr,
        const Eigen::MatrixXf* label_init = nullptr);

  // One slot per training-token occurrence, in corpus order.
  void reset_memory(std::vector<int> slot_words);

  Matrix<S> forward(const EncodedSentence& sentence, const ForwardOptions& options, Tape<S>& tape) const;

  // Backpropagates NLL (plus the optional auxiliary loss) of a forwarded
  // sentence into the registry gradients and returns the loss.
  S backward(const EncodedSentence& sentence, Tape<S>& tape);

  S forward_backward(const EncodedSentence& sentence, const ForwardOptions& options, Tape<S>& tape);

  // Loss only, no gradients.
  S loss(const EncodedSentence& sentence, const ForwardOptions& options) const;

  // Inference: no dropout, no memory writes.
  Matrix<S> emissions(const EncodedSentence& sentence) const;
  std::vector<int> predict(const EncodedSentence& sentence, Diagnostics<S>* diagnostics = nullptr) const;
  std::vector<std::string> predict_tags(const EncodedSentence& sentence) const;

  // Writes every token of a forwarded training sentence: key = current word
  // embedding, value = the encoder state recorded on the tape.
  void write_memory(const EncodedSentence& sentence, const Tape<S>& tape, std::size_t first_slot);

  ParamRegistry<S>& params() { return params_; }
  const ParamRegistry<S>& params() const { return params_; }
  MemoryStore<S>& memory() { return memory_; }
  const MemoryStore<S>& memory() const { return memory_; }
  const ModelConfig& config() const { return config_; }
  const ModelVocabs& vocabs() const { return vocabs_; }

  ParamId word_embedding() const { return word_embedding_; }
  ParamId transitions() const { return transitions_; }
  Index word_dim() const { return config_.word_dim; }
  Index char_dim() const { return intnet_.output_dim(); }
  Index input_dim() const { return word_dim() + char_dim(); }

  template <class T>
  Model<T> cast() const {
    Rng scratch(0);
    Model<T> out(config_, vocabs_, scratch);
    for (std::size_t i = 0; i < params_.size(); ++i) out.params()[i].value = params_[i].value.template cast<T>();
    out.memory() = memory_.template cast<T>();
    return out;
  }

 private:
  bool sentence_on() const { return config_.sentence != SentenceMode::Off; }

  ModelConfig config_;
  ModelVocabs vocabs_;
  ParamRegistry<S> params_;
  ParamId word_embedding_ = 0;
  IntNet<S> intnet_;
  std::optional<SentenceEncoder<S>> sentence_;
  BiLstm<S> encoder_;
  Linear<S> output_;
  ParamId transitions_ = 0;
  MemoryStore<S> memory_;
};

}  // namespace hcner
