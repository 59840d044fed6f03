#include <doctest.h>

#include <sstream>

#include "hcner/model.hpp"
#include "hcner/trainer.hpp"
#include "support.hpp"

using namespace hcner;
using support::MatD;

namespace {

struct Built {
  Corpus corpus = support::tiny_corpus();
  ModelConfig config;
  ModelVocabs vocabs;
  std::vector<EncodedSentence> sents;
};

Built build(ModelConfig config) {
  Built b;
  b.config = config;
  b.vocabs = support::tiny_vocabs(b.corpus, config);
  b.sents = encode_corpus(b.corpus, b.vocabs, config);
  return b;
}

}  // namespace

TEST_CASE("encoding converts tags to the model scheme") {
  const Built b = build(support::tiny_config());
  const auto& s = b.sents[2];  // New York waits
  REQUIRE(s.tags.size() == 3);
  CHECK(b.vocabs.tags.tag(s.tags[0]) == "B-LOC");
  CHECK(b.vocabs.tags.tag(s.tags[1]) == "E-LOC");
  CHECK(b.vocabs.tags.tag(b.sents[0].tags[0]) == "S-PER");
  CHECK(s.chars[1].size() == 4);
  Sentence unlabeled;
  unlabeled.tokens.push_back(make_token("Rome", ""));
  CHECK(encode_sentence(unlabeled, b.vocabs, b.config).tags.empty());
}

TEST_CASE("both context levels off is the plain char-CNN/BiLSTM/CRF path") {
  ModelConfig c = support::tiny_config();
  c.sentence = SentenceMode::Off;
  c.document = false;
  const Built b = build(c);
  Rng rng(1);
  Model<double> model(c, b.vocabs, rng);

  // Rebuild the path from standalone layers sharing the model's values.
  ParamRegistry<double> reg;
  Rng scratch(2);
  const ParamId emb = reg.add("word_embedding", MatD::Zero(b.vocabs.words.size(), c.word_dim));
  const IntNet<double> chars(reg, "chars", b.vocabs.chars.size(), c.intnet, scratch);
  const auto encoder = BiLstm<double>::create(reg, "encoder", model.input_dim(), c.hidden_main, scratch);
  const auto output = Linear<double>::create(reg, "output", c.hidden_main, b.vocabs.tags.size(), scratch);
  REQUIRE(reg.size() + 1 == model.params().size());
  for (auto& p : reg) p.value = model.params().value(*model.params().find(p.name));

  for (const auto& s : b.sents) {
    MatD x(static_cast<Index>(s.size()), model.input_dim());
    for (std::size_t i = 0; i < s.size(); ++i) {
      x.row(static_cast<Index>(i)) << reg.value(emb).row(s.words[i]), chars.encode(reg, s.chars[i]);
    }
    const MatD expected = output.forward(reg, bilstm_encode(reg, encoder, x));
    CHECK((model.emissions(s) - expected).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("inference is repeatable and leaves memory untouched") {
  ModelConfig c = support::tiny_config();
  c.dropout = 0.5;
  const Built b = build(c);
  Rng rng(3);
  Model<double> model(c, b.vocabs, rng);
  std::vector<int> slots;
  for (const auto& s : b.sents) slots.insert(slots.end(), s.memory_keys.begin(), s.memory_keys.end());
  model.reset_memory(slots);
  for (std::size_t i = 0; i < slots.size(); ++i)
    model.memory().update(i, support::random_matrix(1, c.word_dim, rng), support::random_matrix(1, c.hidden_main, rng));
  const MatD keys = model.memory().keys();
  for (const auto& s : b.sents) CHECK(model.emissions(s) == model.emissions(s));
  CHECK(model.memory().keys() == keys);

  Diagnostics<double> d;
  const auto path = model.predict(b.sents[0], &d);
  CHECK(path.size() == 3);
  CHECK(d.beta.sum() == doctest::Approx(1.0));
  CHECK(d.memory_hits == 3);
  CHECK(d.memory_slots[0].size() == 2);  // "anna" occurs twice
}

TEST_CASE("training-mode dropout draws from the supplied stream") {
  ModelConfig c = support::tiny_config();
  c.dropout = 0.5;
  const Built b = build(c);
  Rng rng(4);
  const Model<double> model(c, b.vocabs, rng);
  Rng d1(7), d2(7), d3(8);
  ForwardOptions o1{true, &d1}, o2{true, &d2}, o3{true, &d3};
  Tape<double> t1, t2, t3;
  CHECK(model.forward(b.sents[0], o1, t1) == model.forward(b.sents[0], o2, t2));
  CHECK(model.forward(b.sents[0], o3, t3) != model.forward(b.sents[0], o1, t1));
}

TEST_CASE("joint label input widens the label embeddings") {
  ModelConfig c = support::tiny_config();
  c.label_input = LabelInput::Joint;
  const Built b = build(c);
  Rng rng(5);
  const Model<double> model(c, b.vocabs, rng);
  const auto id = model.params().find("sentence.labels");
  REQUIRE(id);
  CHECK(model.params().value(*id).cols() == model.input_dim());
  CHECK(model.predict_tags(b.sents[1]).size() == 3);
}

TEST_CASE("prediction output is always valid BIO") {
  const TrainResult r = train(support::small_config(), support::small_data());
  const Model<float> m = restore_model(r.best);
  for (const auto& tags : predict_corpus(m, support::small_data().test))
    CHECK_FALSE(first_invalid_tag(tags, TagScheme::BIO).has_value());
}

TEST_CASE("zero epochs returns the initial model without metric rows") {
  TrainConfig c = support::small_config();
  c.epochs = 0;
  const TrainResult r = train(c, support::small_data());
  CHECK(r.history.empty());
  CHECK(r.best_epoch == 0);
  CHECK(r.best.params.size() > 0);
}

TEST_CASE("same seed, same per-epoch metrics; a new seed differs") {
  const auto data = support::small_data();
  TrainConfig c = support::small_config();
  std::ostringstream a, b, d;
  write_epoch_metrics(a, train(c, data).history);
  write_epoch_metrics(b, train(c, data).history);
  c.seed = 4;
  write_epoch_metrics(d, train(c, data).history);
  CHECK(a.str() == b.str());
  CHECK(a.str() != d.str());
  const std::string rows = a.str();
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 2);
}

TEST_CASE("trainer records the decayed learning rate") {
  const TrainResult r = train(support::small_config(), support::small_data());
  REQUIRE(r.history.size() == 2);
  CHECK(r.history[0].lr == 0.015);
  CHECK(r.history[1].lr == doctest::Approx(0.01425));
  CHECK(r.history[0].memory_hits > 0);
}

TEST_CASE("prepare: vocab, label names and embedding rows") {
  const auto data = support::small_data();
  TrainConfig c = support::small_config();
  const Prepared p = prepare(c, data);
  CHECK(p.vocabs.label_names == std::vector<std::string>{"LOC", "MISC", "ORG", "PER", "O"});
  CHECK(p.word_init.rows() == p.vocabs.words.size());
  CHECK(p.word_init.cols() == 16);
  CHECK(p.label_init.rows() == 5);
  CHECK(p.vocabs.tags.scheme() == TagScheme::BIOES);
}

TEST_CASE("missing training data is a configuration error") {
  TrainConfig c;
  CHECK_THROWS_AS(load_datasets(c), ConfigError);
  c.train_path = "/nonexistent/train.txt";
  CHECK_THROWS_AS(load_datasets(c), DataError);
}
