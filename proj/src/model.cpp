#include "hcner/model.hpp"

#include <algorithm>

namespace hcner {

EncodedSentence encode_sentence(const Sentence& sentence, const ModelVocabs& vocabs, const ModelConfig& config) {
  if (sentence.tokens.empty()) throw DataError("cannot encode an empty sentence");
  EncodedSentence out;
  bool labeled = false;
  for (const auto& t : sentence.tokens) {
    const std::string norm = normalize_word(t.surface, config.norm);
    out.words.push_back(vocabs.words.lookup(norm));
    out.memory_keys.push_back(vocabs.memory_words.lookup(norm));
    std::vector<int> chars;
    chars.reserve(t.chars.size());
    for (char32_t cp : t.chars) chars.push_back(vocabs.chars.lookup(encode_utf8(std::u32string_view(&cp, 1))));
    out.chars.push_back(std::move(chars));
    labeled = labeled || !t.tag.empty();
  }
  if (labeled) {
    const auto tags = sentence.tags();
    for (const auto& t : convert_tags(tags, sentence.scheme, config.scheme)) out.tags.push_back(vocabs.tags.id(t));
    out.labels = token_label_ids(sentence, vocabs.label_names);
  }
  return out;
}

std::vector<EncodedSentence> encode_corpus(const Corpus& corpus, const ModelVocabs& vocabs,
                                           const ModelConfig& config) {
  std::vector<EncodedSentence> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.sentences) out.push_back(encode_sentence(s, vocabs, config));
  return out;
}

std::uint64_t sentence_seed(const EncodedSentence& sentence) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (int w : sentence.words) h = splitmix64(h ^ static_cast<std::uint64_t>(w));
  return h;
}

template <class S>
Model<S>::Model(ModelConfig config, ModelVocabs vocabs, Rng& rng, const Eigen::MatrixXf* word_init,
                const Eigen::MatrixXf* label_init)
    : config_(std::move(config)), vocabs_(std::move(vocabs)) {
  config_.validate();
  const Index dw = config_.word_dim;
  const Index v = vocabs_.words.size();
  if (word_init) {
    if (word_init->rows() != v || word_init->cols() != dw) throw ConfigError("word embedding init has wrong shape");
    word_embedding_ = params_.add("word_embedding", word_init->template cast<S>());
  } else {
    word_embedding_ = params_.add("word_embedding", uniform_matrix<S>(v, dw, std::sqrt(3.0 / dw), rng));
  }
  intnet_ = IntNet<S>(params_, "chars", vocabs_.chars.size(), config_.intnet, rng);

  const Index dx = dw + intnet_.output_dim();
  Index encoder_in = dx;
  if (sentence_on()) {
    const auto labels = static_cast<Index>(vocabs_.label_names.size());
    const Index label_dim = config_.label_input == LabelInput::Word ? dw : dx;
    sentence_.emplace(params_, "sentence", config_.sentence, dx, config_.hidden_sent, labels, label_dim,
                      config_.attn_kernel, rng);
    if (label_init && config_.sentence == SentenceMode::LabelAttention) {
      if (label_init->rows() != labels || label_init->cols() != dw)
        throw ConfigError("label embedding init has wrong shape");
      // The character part of joint label vectors starts at zero.
      auto& l = params_.value(sentence_->labels());
      l.setZero();
      l.leftCols(dw) = label_init->template cast<S>();
    }
    encoder_in += config_.hidden_sent;
  }
  encoder_ = BiLstm<S>::create(params_, "encoder", encoder_in, config_.hidden_main, rng);
  output_ = Linear<S>::create(params_, "output", config_.hidden_main, vocabs_.tags.size(), rng);
  transitions_ = params_.add("transitions", crf_transition_init<S>(vocabs_.tags));
}

template <class S>
void Model<S>::reset_memory(std::vector<int> slot_words) {
  memory_ = MemoryStore<S>(std::move(slot_words), config_.word_dim, config_.hidden_main);
}

template <class S>
Matrix<S> Model<S>::forward(const EncodedSentence& sent, const ForwardOptions& opt, Tape<S>& tape) const {
  const auto n = static_cast<Index>(sent.size());
  if (n == 0) throw DataError("cannot run the model on an empty sentence");
  const Index dw = config_.word_dim, dc = intnet_.output_dim();
  const bool drop = opt.training && config_.dropout > 0.0;
  if (drop && !opt.dropout_rng) throw ConfigError("training forward needs a dropout rng");
  Rng no_rng(0);
  Rng& drng = opt.dropout_rng ? *opt.dropout_rng : no_rng;

  const auto& table = params_.value(word_embedding_);
  tape.w.resize(n, dw);
  tape.x.resize(n, dw + dc);
  tape.chars.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    tape.w.row(i) = table.row(sent.words[si]);
    tape.x.row(i).head(dw) = tape.w.row(i);
    tape.x.row(i).tail(dc) = intnet_.forward(params_, sent.chars[si], tape.chars[si]);
  }
  tape.x_drop = dropout<S>(tape.x, config_.dropout, drop, drng);
  const Matrix<S>& xd = tape.x_drop.mask.size() ? tape.x_drop.output : tape.x;

  if (sentence_) {
    if (config_.sentence == SentenceMode::LabelAttention)
      tape.similarity = config_.label_input == LabelInput::Word ? tape.w : tape.x;
    tape.s = sentence_->forward(params_, xd, tape.similarity, tape.sentence);
    tape.x_prime.resize(n, xd.cols() + tape.s.size());
    tape.x_prime.leftCols(xd.cols()) = xd;
    tape.x_prime.rightCols(tape.s.size()) = tape.s.replicate(n, 1);
  }
  const Matrix<S>& enc_in = sentence_ ? tape.x_prime : xd;
  tape.h = encoder_.forward(params_, enc_in, tape.lstm);
  tape.h_drop = dropout<S>(tape.h, config_.dropout, drop, drng);
  const Matrix<S>& hd = tape.h_drop.mask.size() ? tape.h_drop.output : tape.h;

  tape.memory.assign(static_cast<std::size_t>(n), std::nullopt);
  if (config_.document && memory_.slot_count() > 0) {
    Rng mrng(opt.memory_seed);
    tape.g = hd;
    const S lambda = static_cast<S>(config_.lambda);
    for (Index i = 0; i < n; ++i) {
      const auto si = static_cast<std::size_t>(i);
      std::optional<std::size_t> exclude;
      if (config_.exclude_self && opt.first_slot) exclude = *opt.first_slot + si;
      auto slots = memory_.query(sent.memory_keys[si], static_cast<std::size_t>(config_.max_memory), mrng, exclude);
      tape.memory[si] = memory_response<S>(memory_, tape.w.row(i), std::move(slots), config_.compat);
      if (tape.memory[si]) tape.g.row(i) = lambda * hd.row(i) + (S(1) - lambda) * tape.memory[si]->r;
    }
  } else {
    tape.g = hd;
  }
  tape.emissions = output_.forward(params_, tape.g);
  return tape.emissions;
}

template <class S>
S Model<S>::backward(const EncodedSentence& sent, Tape<S>& tape) {
  if (sent.tags.size() != sent.size()) throw DataError("training sentence has no gold tags");
  const auto n = static_cast<Index>(sent.size());
  const Index dw = config_.word_dim;

  CrfLoss<S> crf = nll_loss<S>(tape.emissions, params_.value(transitions_), sent.tags);
  S total = crf.loss;
  params_.grad(transitions_) += crf.d_transitions;

  const Matrix<S> dg = output_.backward(params_, tape.g, crf.d_emissions);
  Matrix<S> dw_rows = Matrix<S>::Zero(n, dw);
  Matrix<S> dhd = dg;
  const S lambda = static_cast<S>(config_.lambda);
  for (Index i = 0; i < n; ++i) {
    const auto& resp = tape.memory[static_cast<std::size_t>(i)];
    if (!resp) continue;
    dhd.row(i) = lambda * dg.row(i);
    const RowVector<S> dr = (S(1) - lambda) * dg.row(i);
    dw_rows.row(i) += memory_response_backward<S>(memory_, tape.w.row(i), *resp, dr, config_.compat);
  }
  const Matrix<S> dh = tape.h_drop.mask.size() ? dropout_backward<S>(dhd, tape.h_drop.mask) : dhd;
  const Matrix<S> din = encoder_.backward(params_, dh, tape.lstm);

  Matrix<S> dxd;
  Matrix<S> dsim;
  if (sentence_) {
    const Index dx_cols = tape.x.cols();
    dxd = din.leftCols(dx_cols);
    const RowVector<S> ds = din.rightCols(din.cols() - dx_cols).colwise().sum();
    const Matrix<S>* dconf = nullptr;
    if (config_.aux_label_loss && config_.sentence == SentenceMode::LabelAttention) {
      tape.d_confidence.resize(0, 0);
      tape.aux_loss = sentence_->auxiliary_loss(tape.sentence, sent.labels, tape.d_confidence);
      total += tape.aux_loss;
      dconf = &tape.d_confidence;
    }
    Matrix<S> dxs;
    sentence_->backward(params_, ds, tape.sentence, dxs, dsim, dconf);
    dxd += dxs;
  } else {
    dxd = din;
  }
  Matrix<S> dx = tape.x_drop.mask.size() ? dropout_backward<S>(dxd, tape.x_drop.mask) : dxd;
  if (dsim.size()) {
    if (config_.label_input == LabelInput::Word)
      dw_rows += dsim;
    else
      dx += dsim;
  }
  dw_rows += dx.leftCols(dw);

  auto& gtable = params_.grad(word_embedding_);
  for (Index i = 0; i < n; ++i) {
    gtable.row(sent.words[static_cast<std::size_t>(i)]) += dw_rows.row(i);
    intnet_.backward(params_, dx.row(i).tail(intnet_.output_dim()), tape.chars[static_cast<std::size_t>(i)]);
  }
  return total;
}

template <class S>
S Model<S>::forward_backward(const EncodedSentence& sent, const ForwardOptions& opt, Tape<S>& tape) {
  forward(sent, opt, tape);
  return backward(sent, tape);
}

template <class S>
S Model<S>::loss(const EncodedSentence& sent, const ForwardOptions& opt) const {
  if (sent.tags.size() != sent.size()) throw DataError("sentence has no gold tags");
  Tape<S> tape;
  forward(sent, opt, tape);
  const auto& t = params_.value(transitions_);
  S total = log_partition<S>(tape.emissions, t) - score_sequence<S>(tape.emissions, t, sent.tags);
  if (config_.aux_label_loss && config_.sentence == SentenceMode::LabelAttention) {
    Matrix<S> scratch;
    total += sentence_->auxiliary_loss(tape.sentence, sent.labels, scratch);
  }
  return total;
}

template <class S>
Matrix<S> Model<S>::emissions(const EncodedSentence& sent) const {
  Tape<S> tape;
  ForwardOptions opt;
  opt.memory_seed = sentence_seed(sent);
  return forward(sent, opt, tape);
}

template <class S>
std::vector<int> Model<S>::predict(const EncodedSentence& sent, Diagnostics<S>* diag) const {
  Tape<S> tape;
  ForwardOptions opt;
  opt.memory_seed = sentence_seed(sent);
  forward(sent, opt, tape);
  if (diag) {
    *diag = Diagnostics<S>{};
    if (sentence_) {
      diag->beta = tape.sentence.beta;
      diag->s = tape.s;
    }
    for (const auto& m : tape.memory) {
      diag->memory_slots.push_back(m ? m->slots : std::vector<std::size_t>{});
      diag->memory_alpha.push_back(m ? m->alpha : Vector<S>{});
      diag->memory_hits += m.has_value();
    }
  }
  return viterbi<S>(tape.emissions, params_.value(transitions_)).path;
}

template <class S>
std::vector<std::string> Model<S>::predict_tags(const EncodedSentence& sent) const {
  std::vector<std::string> tags;
  for (int id : predict(sent)) tags.push_back(vocabs_.tags.tag(id));
  return tags;
}

template <class S>
void Model<S>::write_memory(const EncodedSentence& sent, const Tape<S>& tape, std::size_t first_slot) {
  if (!config_.document || memory_.slot_count() == 0) return;
  const auto& table = params_.value(word_embedding_);
  for (std::size_t i = 0; i < sent.size(); ++i)
    memory_.update(first_slot + i, table.row(sent.words[i]), tape.h.row(static_cast<Index>(i)));
}

template class Model<float>;
template class Model<double>;

}  // namespace hcner
