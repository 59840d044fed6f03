// Independent reference implementations and small builders shared by the
// unit tests and the acceptance binary. Nothing here calls the library code
// it is used to check.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "hcner/corpus.hpp"
#include "hcner/model.hpp"
#include "hcner/nn.hpp"
#include "hcner/random.hpp"
#include "hcner/synthetic.hpp"
#include "hcner/trainer.hpp"

namespace support {

using hcner::Index;
using hcner::Rng;
using MatD = hcner::Matrix<double>;

// ---- CRF by enumeration -----------------------------------------------------

// Score of one path, summed left to right: start, e_0, t(0,1), e_1, ..., end.
inline double path_score(const MatD& e, const MatD& tr, const std::vector<int>& y) {
  const Index p = e.cols();
  double s = tr(p, y[0]);
  for (std::size_t i = 0; i < y.size(); ++i) {
    s += e(static_cast<Index>(i), y[i]);
    if (i + 1 < y.size()) s += tr(y[i], y[i + 1]);
  }
  return s + tr(y.back(), p + 1);
}

inline void for_each_path(int n, int p, const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> y(static_cast<std::size_t>(n), 0);
  for (;;) {
    f(y);
    int i = n - 1;
    while (i >= 0 && ++y[static_cast<std::size_t>(i)] == p) y[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) return;
  }
}

struct Enumerated {
  double log_z = 0;
  std::vector<int> best;
  double best_score = -std::numeric_limits<double>::infinity();
  MatD marginals;
};

inline Enumerated enumerate_crf(const MatD& e, const MatD& tr) {
  const int n = static_cast<int>(e.rows()), p = static_cast<int>(e.cols());
  Enumerated out;
  std::vector<std::pair<double, std::vector<int>>> all;
  double top = -std::numeric_limits<double>::infinity();
  for_each_path(n, p, [&](const std::vector<int>& y) {
    const double s = path_score(e, tr, y);
    all.emplace_back(s, y);
    top = std::max(top, s);
    // Enumeration order is lexicographic, so strict > keeps the lowest path.
    if (s > out.best_score) {
      out.best_score = s;
      out.best = y;
    }
  });
  double z = 0;
  for (const auto& [s, y] : all) z += std::exp(s - top);
  out.log_z = top + std::log(z);
  out.marginals = MatD::Zero(n, p);
  for (const auto& [s, y] : all)
    for (int i = 0; i < n; ++i) out.marginals(i, y[static_cast<std::size_t>(i)]) += std::exp(s - out.log_z);
  return out;
}

// ---- spans ------------------------------------------------------------------

using Span = std::tuple<std::string, std::size_t, std::size_t>;

// conlleval chunk boundaries, written as its start/end predicates.
inline std::set<Span> spans(const std::vector<std::string>& tags) {
  auto parts = [](const std::string& t) -> std::pair<char, std::string> {
    if (t == "O" || t.size() < 3) return {'O', ""};
    return {t[0], t.substr(2)};
  };
  std::set<Span> out;
  char prev_tag = 'O';
  std::string prev_type;
  std::size_t start = 0;
  bool in_chunk = false;
  for (std::size_t i = 0; i <= tags.size(); ++i) {
    auto [tag, type] = i < tags.size() ? parts(tags[i]) : std::pair<char, std::string>{'O', ""};
    const bool ends = (prev_tag == 'B' && tag == 'B') || (prev_tag == 'B' && tag == 'S') ||
                      (prev_tag == 'B' && tag == 'O') || (prev_tag == 'I' && tag == 'B') ||
                      (prev_tag == 'I' && tag == 'S') || (prev_tag == 'I' && tag == 'O') || prev_tag == 'E' ||
                      prev_tag == 'S' || (prev_tag != 'O' && prev_type != type);
    const bool starts = tag == 'B' || tag == 'S' || (prev_tag == 'E' && (tag == 'E' || tag == 'I')) ||
                        (prev_tag == 'S' && (tag == 'E' || tag == 'I')) ||
                        (prev_tag == 'O' && (tag == 'E' || tag == 'I')) || (tag != 'O' && prev_type != type);
    if (in_chunk && ends) {
      out.insert({prev_type, start, i - 1});
      in_chunk = false;
    }
    if (starts) {
      start = i;
      in_chunk = true;
    }
    prev_tag = tag;
    prev_type = type;
  }
  return out;
}

// Random valid BIO sequence of length n.
inline std::vector<std::string> random_bio(Rng& rng, std::size_t n, const std::vector<std::string>& types) {
  std::vector<std::string> out;
  std::string open;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = hcner::uniform01(rng);
    if (!open.empty() && u < 0.35) {
      out.push_back("I-" + open);
    } else if (u < 0.7) {
      open = types[hcner::uniform_index(rng, types.size())];
      out.push_back("B-" + open);
    } else {
      open.clear();
      out.push_back("O");
    }
  }
  return out;
}

// ---- layers -----------------------------------------------------------------

// y[i][o] = b[o] + sum_t sum_c W[o][t*in + c] x[i - half + t][c]
inline MatD naive_conv(const MatD& x, const MatD& w, const MatD& b, Index k) {
  const Index n = x.rows(), in = x.cols(), out = w.rows(), half = (k - 1) / 2;
  MatD y(n, out);
  for (Index i = 0; i < n; ++i)
    for (Index o = 0; o < out; ++o) {
      double s = b(0, o);
      for (Index t = 0; t < k; ++t) {
        const Index src = i - half + t;
        if (src < 0 || src >= n) continue;
        for (Index c = 0; c < in; ++c) s += w(o, t * in + c) * x(src, c);
      }
      y(i, o) = s;
    }
  return y;
}

inline std::vector<double> naive_window_pool(const MatD& e, const std::vector<double>& w,
                                             const std::vector<double>& b) {
  const Index n = e.rows(), p = e.cols();
  const auto k = static_cast<Index>(w.size()), half = (k - 1) / 2;
  std::vector<double> m(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < p; ++j) {
      double u = b[static_cast<std::size_t>(j)];
      for (Index t = 0; t < k; ++t) {
        const Index src = i - half + t;
        if (src >= 0 && src < n) u += w[static_cast<std::size_t>(t)] * e(src, j);
      }
      best = std::max(best, u);
    }
    m[static_cast<std::size_t>(i)] = best;
  }
  return m;
}

inline double naive_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return d / std::sqrt(na * nb);
}

inline MatD random_matrix(Index r, Index c, Rng& rng, double scale = 1.0) {
  MatD m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = hcner::uniform(rng, -scale, scale);
  return m;
}

// Moves every parameter off its initial value. Zero biases put ReLU and max
// inputs exactly on their kinks, where finite differences are meaningless.
template <class Reg>
void jitter(Reg& reg, Rng& rng, double scale = 0.1) {
  for (auto& p : reg)
    for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += hcner::uniform(rng, -scale, scale);
}

// ---- small models -------------------------------------------------------------

inline hcner::Corpus tiny_corpus() {
  const std::vector<std::vector<std::pair<std::string, std::string>>> rows{
      {{"Anna", "B-PER"}, {"visits", "O"}, {"Rome", "B-LOC"}},
      {{"Rome", "B-LOC"}, {"greets", "O"}, {"Anna", "B-PER"}},
      {{"New", "B-LOC"}, {"York", "I-LOC"}, {"waits", "O"}},
  };
  hcner::Corpus c;
  for (const auto& r : rows) {
    hcner::Sentence s;
    for (const auto& [w, t] : r) s.tokens.push_back(hcner::make_token(w, t));
    c.sentences.push_back(std::move(s));
  }
  return c;
}

inline hcner::ModelConfig tiny_config() {
  hcner::ModelConfig c;
  c.word_dim = 6;
  c.intnet.char_dim = 4;
  c.intnet.init_filters = 4;
  c.intnet.block_filters = 3;
  c.intnet.layers = 5;
  c.hidden_main = 8;
  c.hidden_sent = 6;
  c.dropout = 0.0;
  return c;
}

inline hcner::ModelVocabs tiny_vocabs(const hcner::Corpus& corpus, const hcner::ModelConfig& config) {
  hcner::ModelVocabs v;
  v.words = hcner::build_vocab(corpus, 1, config.norm);
  v.memory_words = v.words;
  v.chars = hcner::build_char_vocab(corpus);
  const auto types = hcner::entity_types(corpus);
  v.tags = hcner::TagSet(types, config.scheme);
  v.label_names = types;
  v.label_names.push_back("O");
  v.in_train.assign(static_cast<std::size_t>(v.words.size()), 1);
  v.pretrained.assign(static_cast<std::size_t>(v.words.size()), 0);
  return v;
}

// A few epochs over a small generated corpus with small layers.
inline hcner::TrainConfig small_config() {
  hcner::TrainConfig c;
  c.model.word_dim = 16;
  c.model.intnet.char_dim = 8;
  c.model.intnet.init_filters = 8;
  c.model.intnet.block_filters = 4;
  c.model.intnet.layers = 3;
  c.model.hidden_main = 16;
  c.model.hidden_sent = 8;
  c.epochs = 2;
  c.seed = 3;
  return c;
}

inline hcner::Datasets small_data(std::size_t train = 60, std::size_t dev = 20, std::size_t test = 20) {
  hcner::SyntheticConfig sc;
  sc.train_sentences = train;
  sc.dev_sentences = dev;
  sc.test_sentences = test;
  const auto syn = hcner::generate_synthetic(sc);
  return {syn.train, syn.dev, syn.test};
}

}  // namespace support
