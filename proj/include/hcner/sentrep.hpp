#pragma once

#include <span>
#include <string>
#include <vector>

#include "hcner/corpus.hpp"
#include "hcner/nn.hpp"

namespace hcner {

enum class SentenceMode { Off, Mean, LabelAttention };

// What the label embeddings are compared against: the word embedding alone or
// the joint [word; char] vector.
enum class LabelInput { Word, Joint };

std::string_view to_string(SentenceMode mode);
SentenceMode parse_sentence_mode(std::string_view name);
std::string_view to_string(LabelInput input);
LabelInput parse_label_input(std::string_view name);

struct LabelEmbeddings {
  Eigen::MatrixXf matrix;          // P x d
  std::vector<std::string> names;  // entity types followed by "O"
};

// Each row is the mean word embedding of up to `samples_per_type` randomly
// chosen tokens bearing that type; the outside class uses O tokens. Throws
// DataError naming any type with no occurrences.
LabelEmbeddings init_label_embeddings(const Corpus& corpus, const Vocab& vocab, const Eigen::MatrixXf& embeddings,
                                      std::span<const std::string> types, std::size_t samples_per_type, Rng& rng,
                                      const Normalization& norm = {});

// Label index of every token (types in `names` order, O last).
std::vector<int> token_label_ids(const Sentence& sentence, std::span<const std::string> names);

// e(i, j) = cosine(words_i, labels_j). Throws DataError on zero-norm rows.
template <class S>
Matrix<S> label_confidence(const Matrix<S>& words, const Matrix<S>& labels);

template <class S>
void label_confidence_backward(const Matrix<S>& words, const Matrix<S>& labels, const Matrix<S>& e,
                               const Matrix<S>& de, Matrix<S>& dwords, Matrix<S>& dlabels);

// m_i = max_j (sum_t weight_t * e(i - half + t, j) + bias_j) with zero rows
// outside the sentence.
template <class S>
Vector<S> window_pool(const Matrix<S>& e, const RowVector<S>& weight, const RowVector<S>& bias,
                      std::vector<Index>* argmax = nullptr);

template <class S>
void window_pool_backward(const Matrix<S>& e, const RowVector<S>& weight, std::span<const Index> argmax,
                          const Vector<S>& dm, Matrix<S>& de, RowVector<S>& dweight, RowVector<S>& dbias);

template <class S>
Vector<S> sentence_attention(const Vector<S>& m) {
  return softmax<S>(m);
}

template <class S>
RowVector<S> sentence_repr(const Vector<S>& beta, const Matrix<S>& v) {
  return (v.transpose() * beta).transpose();
}

// Independent BiLSTM over x_i plus the pooling that turns its states into a
// single sentence vector.
template <class S>
class SentenceEncoder {
 public:
  struct Cache {
    BiLstmCache<S> lstm;
    Matrix<S> states;      // v: N x hidden
    Matrix<S> similarity;  // inputs compared against the labels
    Matrix<S> confidence;  // e: N x P
    std::vector<Index> argmax;
    Vector<S> scores;  // m
    Vector<S> beta;
  };

  SentenceEncoder() = default;
  SentenceEncoder(ParamRegistry<S>& reg, const std::string& name, SentenceMode mode, Index input_dim,
                  Index hidden, Index label_count, Index label_dim, int kernel, Rng& rng);

  RowVector<S> forward(const ParamRegistry<S>& reg, const Matrix<S>& x, const Matrix<S>& similarity,
                       Cache& cache) const;

  // Accumulates parameter gradients; writes d/dx and d/d(similarity input).
  // `dconfidence` adds an external gradient on e (auxiliary loss).
  void backward(ParamRegistry<S>& reg, const RowVector<S>& ds, const Cache& cache, Matrix<S>& dx,
                Matrix<S>& dsimilarity, const Matrix<S>* dconfidence = nullptr) const;

  // Cross-entropy of softmax(e_i) against the gold label of each token;
  // adds its gradient into `dconfidence`.
  S auxiliary_loss(const Cache& cache, std::span<const int> gold, Matrix<S>& dconfidence) const;

  SentenceMode mode() const { return mode_; }
  Index hidden() const { return lstm_.hidden; }
  ParamId labels() const { return labels_; }
  ParamId attention_weight() const { return weight_; }
  ParamId attention_bias() const { return bias_; }

 private:
  SentenceMode mode_ = SentenceMode::Off;
  BiLstm<S> lstm_;
  ParamId labels_ = 0;
  ParamId weight_ = 0;
  ParamId bias_ = 0;
};

}  // namespace hcner
