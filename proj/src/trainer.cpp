#include "hcner/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace hcner {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Files using E- or S- prefixes are read as BIOES.
Corpus read_labeled(const std::string& path) {
  Corpus c = read_conll(path);
  bool bioes = false;
  for (const auto& s : c.sentences)
    for (const auto& t : s.tokens) {
      const char p = split_tag(t.tag).prefix;
      bioes = bioes || p == 'E' || p == 'S';
    }
  if (bioes)
    for (auto& s : c.sentences) s.scheme = TagScheme::BIOES;
  validate_corpus(c);
  return c;
}

// Streams derived from the run seed, one per consumer, so that switching a
// component on or off never shifts another component's random draws.
enum Stream : std::uint64_t { kInit = 1, kEmbeddings, kLabels, kShuffle, kDropout, kMemory };

}  // namespace

Datasets load_datasets(const TrainConfig& config) {
  if (config.train_path.empty()) throw ConfigError("no training corpus given");
  Datasets d;
  d.train = read_labeled(config.train_path);
  if (!config.dev_path.empty()) d.dev = read_labeled(config.dev_path);
  if (!config.test_path.empty()) d.test = read_labeled(config.test_path);
  return d;
}

Prepared prepare(const TrainConfig& config, const Datasets& data) {
  const ModelConfig& mc = config.model;
  if (data.train.empty()) throw DataError("training corpus is empty");
  Prepared p;
  ModelVocabs& v = p.vocabs;

  v.words = build_vocab(data.train, static_cast<std::size_t>(config.min_freq), mc.norm);
  v.memory_words = build_vocab(data.train, 1, mc.norm);
  v.chars = build_char_vocab(data.train);

  std::unordered_set<std::string> file_words;
  if (!config.embeddings_path.empty()) {
    file_words = embedding_words(config.embeddings_path, mc.norm);
    for (const Corpus* c : {&data.dev, &data.test})
      for (const auto& s : c->sentences)
        for (const auto& t : s.tokens) {
          const std::string w = normalize_word(t.surface, mc.norm);
          if (!v.words.contains(w) && file_words.count(w)) v.words.add(w);
        }
  }

  Rng emb_rng(derive_seed(config.seed, {kEmbeddings}));
  EmbeddingTable table = config.embeddings_path.empty()
                             ? random_embeddings(v.words, mc.word_dim, emb_rng)
                             : load_embeddings(config.embeddings_path, v.words, mc.word_dim, emb_rng, mc.norm);
  p.word_init = std::move(table.matrix);
  p.embedding_coverage = table.coverage;
  v.pretrained.assign(table.pretrained.begin(), table.pretrained.end());
  v.in_train.assign(static_cast<std::size_t>(v.words.size()), 0);
  for (int id = 2; id < v.words.size(); ++id) v.in_train[static_cast<std::size_t>(id)] = v.memory_words.contains(v.words.word(id));

  // Types seen anywhere, so that dev/test gold tags always have an id.
  std::vector<std::string> types = entity_types(data.train);
  for (const Corpus* c : {&data.dev, &data.test})
    for (const auto& t : entity_types(*c))
      if (std::find(types.begin(), types.end(), t) == types.end()) types.push_back(t);
  std::sort(types.begin(), types.end());
  v.tags = TagSet(types, mc.scheme);
  v.label_names = types;
  v.label_names.push_back("O");

  if (mc.sentence == SentenceMode::LabelAttention) {
    Rng label_rng(derive_seed(config.seed, {kLabels}));
    p.label_init = init_label_embeddings(data.train, v.words, p.word_init, types,
                                         static_cast<std::size_t>(mc.label_samples), label_rng, mc.norm)
                       .matrix;
  }
  return p;
}

double gradient_norm(const ParamRegistry<float>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.grad.allFinite()) throw NumericError("non-finite gradient in parameter '" + p.name + "'");
    sq += p.grad.template cast<double>().squaredNorm();
  }
  return std::sqrt(sq);
}

void sgd_step(ParamRegistry<float>& params, double lr) {
  const auto step = static_cast<float>(lr);
  for (auto& p : params) {
    p.value -= step * p.grad;
    p.grad.setZero();
  }
}

std::vector<std::vector<std::string>> predict_corpus(const Model<float>& model, const Corpus& corpus) {
  std::vector<std::vector<std::string>> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.sentences) {
    Sentence unlabeled = s;
    for (auto& t : unlabeled.tokens) t.tag.clear();
    const auto tags = model.predict_tags(encode_sentence(unlabeled, model.vocabs(), model.config()));
    out.push_back(bio_tags(tags));
  }
  return out;
}

std::vector<std::vector<std::string>> gold_bio(const Corpus& corpus) {
  std::vector<std::vector<std::string>> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.sentences) out.push_back(convert_tags(s.tags(), s.scheme, TagScheme::BIO));
  return out;
}

Evaluation evaluate_model(const Model<float>& model, const Corpus& corpus) {
  return evaluate(gold_bio(corpus), predict_corpus(model, corpus), TagScheme::BIO);
}

TrainResult train(const TrainConfig& config, const Datasets& data, const TrainHooks& hooks) {
  config.validate();
  const Prepared prep = prepare(config, data);
  Rng init_rng(derive_seed(config.seed, {kInit}));
  Model<float> model(config.model, prep.vocabs, init_rng, &prep.word_init,
                     prep.label_init.size() ? &prep.label_init : nullptr);

  const auto sentences = encode_corpus(data.train, model.vocabs(), model.config());
  std::vector<std::size_t> first_slot(sentences.size());
  std::vector<int> slot_words;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    first_slot[s] = slot_words.size();
    slot_words.insert(slot_words.end(), sentences[s].memory_keys.begin(), sentences[s].memory_keys.end());
  }
  if (config.model.document) model.reset_memory(slot_words);

  std::vector<std::vector<std::string>> context;
  for (const auto& s : data.train.sentences) {
    std::vector<std::string> words;
    for (const auto& t : s.tokens) words.push_back(t.surface);
    context.push_back(std::move(words));
  }

  TrainResult result;
  auto snapshot = [&](int epoch, const Counts* dev) {
    std::map<std::string, std::string> meta{{"epoch", std::to_string(epoch)}};
    if (dev) meta["dev_f1"] = format_percent(dev->f1());
    result.best = make_checkpoint(model, config, context, std::move(meta));
    result.best_epoch = epoch;
  };
  snapshot(0, nullptr);

  Rng shuffle_rng(derive_seed(config.seed, {kShuffle}));
  Rng dropout_rng(derive_seed(config.seed, {kDropout}));
  std::vector<std::size_t> order(sentences.size());
  std::vector<Tape<float>> tapes(static_cast<std::size_t>(config.batch_size));
  double best_f1 = -1.0;
  auto& params = model.params();
  params.zero_grad();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = Clock::now();
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.lr = learning_rate(config, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      for (std::size_t k = b; k < end; ++k) {
        const std::size_t s = order[k];
        ForwardOptions opt;
        opt.training = true;
        opt.dropout_rng = &dropout_rng;
        opt.memory_seed = derive_seed(config.seed, {kMemory, static_cast<std::uint64_t>(epoch), s});
        opt.first_slot = first_slot[s];
        Tape<float>& tape = tapes[k - b];
        const float loss = model.forward_backward(sentences[s], opt, tape);
        if (!std::isfinite(loss)) throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1));
        epoch_loss += loss;
        for (const auto& r : tape.memory) m.memory_hits += r.has_value();
      }
      const double norm = gradient_norm(params);
      if (config.clip_norm > 0.0 && norm > config.clip_norm) {
        const auto scale = static_cast<float>(config.clip_norm / norm);
        for (auto& p : params) p.grad *= scale;
      }
      sgd_step(params, m.lr);
      for (std::size_t k = b; k < end; ++k) model.write_memory(sentences[order[k]], tapes[k - b], first_slot[order[k]]);
    }
    m.loss = epoch_loss;
    m.seconds = seconds_since(start);
    result.train_seconds += m.seconds;

    if (!data.dev.empty()) {
      m.dev = evaluate_model(model, data.dev).overall;
      if (m.dev.f1() > best_f1) {
        best_f1 = m.dev.f1();
        snapshot(m.epoch, &m.dev);
      }
    } else {
      snapshot(m.epoch, nullptr);
    }
    result.history.push_back(m);
    if (hooks.on_epoch) hooks.on_epoch(m);
  }
  return result;
}

void write_epoch_metrics(std::ostream& out, const std::vector<EpochMetrics>& history) {
  char buf[512];
  for (const auto& m : history) {
    std::snprintf(buf, sizeof buf,
                  "epoch=%d lr=%.9g loss=%.6f dev_precision=%.2f dev_recall=%.2f dev_f1=%.2f dev_gold=%zu "
                  "dev_predicted=%zu dev_correct=%zu memory_hits=%zu\n",
                  m.epoch, m.lr, m.loss, m.dev.precision(), m.dev.recall(), m.dev.f1(), m.dev.gold, m.dev.predicted,
                  m.dev.correct, m.memory_hits);
    out << buf;
  }
}

}  // namespace hcner
