#include "hcner/sentrep.hpp"

#include <algorithm>
#include <cmath>

namespace hcner {

std::string_view to_string(SentenceMode mode) {
  switch (mode) {
    case SentenceMode::Off: return "off";
    case SentenceMode::Mean: return "mean";
    case SentenceMode::LabelAttention: return "label-attn";
  }
  return "?";
}

SentenceMode parse_sentence_mode(std::string_view name) {
  if (name == "off") return SentenceMode::Off;
  if (name == "mean") return SentenceMode::Mean;
  if (name == "label-attn") return SentenceMode::LabelAttention;
  throw ConfigError("unknown sentence mode '" + std::string(name) + "' (off|mean|label-attn)");
}

std::string_view to_string(LabelInput input) { return input == LabelInput::Word ? "word" : "joint"; }

LabelInput parse_label_input(std::string_view name) {
  if (name == "word") return LabelInput::Word;
  if (name == "joint") return LabelInput::Joint;
  throw ConfigError("unknown label input '" + std::string(name) + "' (word|joint)");
}

LabelEmbeddings init_label_embeddings(const Corpus& corpus, const Vocab& vocab, const Eigen::MatrixXf& embeddings,
                                      std::span<const std::string> types, std::size_t samples_per_type, Rng& rng,
                                      const Normalization& norm) {
  if (samples_per_type < 1) throw ConfigError("samples_per_type must be >= 1");
  LabelEmbeddings out;
  out.names.assign(types.begin(), types.end());
  out.names.push_back("O");

  std::vector<std::vector<int>> occurrences(out.names.size());
  for (const auto& s : corpus.sentences) {
    const auto labels = token_label_ids(s, out.names);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (labels[i] < 0) continue;
      occurrences[static_cast<std::size_t>(labels[i])].push_back(
          vocab.lookup(normalize_word(s.tokens[i].surface, norm)));
    }
  }

  out.matrix.resize(static_cast<Index>(out.names.size()), embeddings.cols());
  for (std::size_t p = 0; p < out.names.size(); ++p) {
    auto& occ = occurrences[p];
    if (occ.empty()) throw DataError("label type '" + out.names[p] + "' has no occurrences");
    if (occ.size() > samples_per_type) {
      // partial Fisher-Yates: the first samples_per_type entries are a uniform sample
      for (std::size_t i = 0; i < samples_per_type; ++i) {
        const auto j = i + uniform_index(rng, occ.size() - i);
        std::swap(occ[i], occ[j]);
      }
      occ.resize(samples_per_type);
    }
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(embeddings.cols());
    for (int id : occ) sum += embeddings.row(id).cast<double>();
    out.matrix.row(static_cast<Index>(p)) = (sum / static_cast<double>(occ.size())).cast<float>();
  }
  return out;
}

std::vector<int> token_label_ids(const Sentence& sentence, std::span<const std::string> names) {
  std::vector<int> out;
  out.reserve(sentence.size());
  for (const auto& t : sentence.tokens) {
    const TagParts p = split_tag(t.tag);
    const std::string& key = p.prefix == 'O' ? std::string("O") : p.type;
    auto it = std::find(names.begin(), names.end(), key);
    out.push_back(it == names.end() ? -1 : static_cast<int>(it - names.begin()));
  }
  return out;
}

template <class S>
Matrix<S> label_confidence(const Matrix<S>& words, const Matrix<S>& labels) {
  const Vector<S> wn = words.rowwise().norm();
  const Vector<S> ln = labels.rowwise().norm();
  if ((wn.array() == S(0)).any()) throw DataError("label confidence: zero-norm word vector");
  if ((ln.array() == S(0)).any()) throw DataError("label confidence: zero-norm label embedding");
  Matrix<S> e = words * labels.transpose();
  e.array().colwise() /= wn.array();
  e.array().rowwise() /= ln.transpose().array();
  return e;
}

template <class S>
void label_confidence_backward(const Matrix<S>& words, const Matrix<S>& labels, const Matrix<S>& e,
                               const Matrix<S>& de, Matrix<S>& dwords, Matrix<S>& dlabels) {
  const Vector<S> wn = words.rowwise().norm();
  const Vector<S> ln = labels.rowwise().norm();
  Matrix<S> wu = words;
  wu.array().colwise() /= wn.array();
  Matrix<S> lu = labels;
  lu.array().colwise() /= ln.array();
  const Matrix<S> de_e = de.cwiseProduct(e);

  Matrix<S> dw = de * lu;
  dw -= wu.cwiseProduct(de_e.rowwise().sum().replicate(1, wu.cols()));
  dw.array().colwise() /= wn.array();
  dwords += dw;

  Matrix<S> dl = de.transpose() * wu;
  dl -= lu.cwiseProduct(de_e.colwise().sum().transpose().replicate(1, lu.cols()));
  dl.array().colwise() /= ln.array();
  dlabels += dl;
}

template <class S>
Vector<S> window_pool(const Matrix<S>& e, const RowVector<S>& weight, const RowVector<S>& bias,
                      std::vector<Index>* argmax) {
  const Index n = e.rows();
  const Index k = weight.size();
  if (k < 1 || k % 2 == 0) throw ConfigError("attention kernel must be odd");
  if (bias.size() != e.cols()) throw ConfigError("attention bias size does not match label count");
  const Index half = (k - 1) / 2;
  Vector<S> m(n);
  if (argmax) argmax->assign(static_cast<std::size_t>(n), 0);
  RowVector<S> u(e.cols());
  for (Index i = 0; i < n; ++i) {
    u = bias;
    for (Index t = 0; t < k; ++t) {
      const Index src = i + t - half;
      if (src >= 0 && src < n) u += weight(t) * e.row(src);
    }
    Index arg = 0;
    m(i) = u.maxCoeff(&arg);
    if (argmax) (*argmax)[static_cast<std::size_t>(i)] = arg;
  }
  return m;
}

template <class S>
void window_pool_backward(const Matrix<S>& e, const RowVector<S>& weight, std::span<const Index> argmax,
                          const Vector<S>& dm, Matrix<S>& de, RowVector<S>& dweight, RowVector<S>& dbias) {
  const Index n = e.rows();
  const Index k = weight.size();
  const Index half = (k - 1) / 2;
  for (Index i = 0; i < n; ++i) {
    const Index j = argmax[static_cast<std::size_t>(i)];
    dbias(j) += dm(i);
    for (Index t = 0; t < k; ++t) {
      const Index src = i + t - half;
      if (src < 0 || src >= n) continue;
      dweight(t) += dm(i) * e(src, j);
      de(src, j) += dm(i) * weight(t);
    }
  }
}

template <class S>
SentenceEncoder<S>::SentenceEncoder(ParamRegistry<S>& reg, const std::string& name, SentenceMode mode,
                                    Index input_dim, Index hidden, Index label_count, Index label_dim, int kernel,
                                    Rng& rng)
    : mode_(mode) {
  if (mode == SentenceMode::Off) throw ConfigError("sentence encoder constructed with mode off");
  lstm_ = BiLstm<S>::create(reg, name + ".lstm", input_dim, hidden, rng);
  if (mode == SentenceMode::LabelAttention) {
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("attention kernel must be odd");
    labels_ = reg.add(name + ".labels", uniform_matrix<S>(label_count, label_dim, std::sqrt(3.0 / label_dim), rng));
    weight_ = reg.add(name + ".attn_weight", glorot_uniform<S>(1, kernel, rng));
    bias_ = reg.add(name + ".attn_bias", Matrix<S>::Zero(1, label_count));
  }
}

template <class S>
RowVector<S> SentenceEncoder<S>::forward(const ParamRegistry<S>& reg, const Matrix<S>& x,
                                         const Matrix<S>& similarity, Cache& cache) const {
  cache.states = lstm_.forward(reg, x, cache.lstm);
  const Index n = x.rows();
  if (mode_ == SentenceMode::Mean) {
    cache.beta = Vector<S>::Constant(n, S(1) / static_cast<S>(n));
    return cache.states.colwise().mean();
  }
  cache.similarity = similarity;
  cache.confidence = label_confidence<S>(similarity, reg.value(labels_));
  cache.scores = window_pool<S>(cache.confidence, reg.value(weight_).row(0), reg.value(bias_).row(0), &cache.argmax);
  cache.beta = sentence_attention<S>(cache.scores);
  return sentence_repr<S>(cache.beta, cache.states);
}

template <class S>
void SentenceEncoder<S>::backward(ParamRegistry<S>& reg, const RowVector<S>& ds, const Cache& cache, Matrix<S>& dx,
                                  Matrix<S>& dsimilarity, const Matrix<S>* dconfidence) const {
  const Index n = cache.states.rows();
  Matrix<S> dv;
  if (mode_ == SentenceMode::Mean) {
    dv = ds.replicate(n, 1) / static_cast<S>(n);
  } else {
    dv = cache.beta * ds;
    const Vector<S> dbeta = cache.states * ds.transpose();
    const Vector<S> dm = softmax_backward<S>(cache.beta, dbeta);
    Matrix<S> de = Matrix<S>::Zero(cache.confidence.rows(), cache.confidence.cols());
    RowVector<S> dweight = RowVector<S>::Zero(reg.value(weight_).cols());
    RowVector<S> dbias = RowVector<S>::Zero(reg.value(bias_).cols());
    window_pool_backward<S>(cache.confidence, reg.value(weight_).row(0), cache.argmax, dm, de, dweight, dbias);
    reg.grad(weight_).row(0) += dweight;
    reg.grad(bias_).row(0) += dbias;
    if (dconfidence) de += *dconfidence;
    if (dsimilarity.rows() != cache.similarity.rows() || dsimilarity.cols() != cache.similarity.cols())
      dsimilarity = Matrix<S>::Zero(cache.similarity.rows(), cache.similarity.cols());
    label_confidence_backward<S>(cache.similarity, reg.value(labels_), cache.confidence, de, dsimilarity,
                                 reg.grad(labels_));
  }
  dx = lstm_.backward(reg, dv, cache.lstm);
}

template <class S>
S SentenceEncoder<S>::auxiliary_loss(const Cache& cache, std::span<const int> gold, Matrix<S>& dconfidence) const {
  if (mode_ != SentenceMode::LabelAttention) return S(0);
  if (dconfidence.rows() != cache.confidence.rows() || dconfidence.cols() != cache.confidence.cols())
    dconfidence = Matrix<S>::Zero(cache.confidence.rows(), cache.confidence.cols());
  S loss = 0;
  for (Index i = 0; i < cache.confidence.rows(); ++i) {
    const int y = gold[static_cast<std::size_t>(i)];
    if (y < 0) continue;
    const Vector<S> row = cache.confidence.row(i).transpose();
    const Vector<S> p = softmax<S>(row);
    loss -= std::log(p(y));
    dconfidence.row(i) += p.transpose();
    dconfidence(i, y) -= S(1);
  }
  return loss;
}

#define HCNER_INSTANTIATE_SENTREP(S)                                                                        \
  template Matrix<S> label_confidence<S>(const Matrix<S>&, const Matrix<S>&);                               \
  template void label_confidence_backward<S>(const Matrix<S>&, const Matrix<S>&, const Matrix<S>&,          \
                                             const Matrix<S>&, Matrix<S>&, Matrix<S>&);                     \
  template Vector<S> window_pool<S>(const Matrix<S>&, const RowVector<S>&, const RowVector<S>&,             \
                                    std::vector<Index>*);                                                   \
  template void window_pool_backward<S>(const Matrix<S>&, const RowVector<S>&, std::span<const Index>,      \
                                        const Vector<S>&, Matrix<S>&, RowVector<S>&, RowVector<S>&);        \
  template class SentenceEncoder<S>;

HCNER_INSTANTIATE_SENTREP(float)
HCNER_INSTANTIATE_SENTREP(double)

}  // namespace hcner
