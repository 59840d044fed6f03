#include <doctest.h>

#include <sstream>

#include "hcner/eval.hpp"

using namespace hcner;
using V = std::vector<std::string>;

namespace {

Corpus sentences(const std::vector<V>& words) {
  Corpus c;
  for (const auto& ws : words) {
    Sentence s;
    for (const auto& w : ws) s.tokens.push_back(make_token(w, "O"));
    c.sentences.push_back(s);
  }
  return c;
}

Vocab vocab(const V& words) {
  Vocab v;
  for (const auto& w : words) v.add(w);
  return v;
}

}  // namespace

TEST_CASE("span extraction") {
  CHECK(entity_spans(V{"B-LOC", "O"}) == std::vector<EntitySpan>{{"LOC", 0, 0}});
  CHECK(entity_spans(V{"B-PER", "I-PER", "B-PER"}) == std::vector<EntitySpan>{{"PER", 0, 1}, {"PER", 2, 2}});
  CHECK(entity_spans(V{"O", "I-ORG", "I-ORG"}) == std::vector<EntitySpan>{{"ORG", 1, 2}});
  CHECK(entity_spans(V{"B-ORG", "I-LOC"}) == std::vector<EntitySpan>{{"ORG", 0, 0}, {"LOC", 1, 1}});
  CHECK(entity_spans(V{"S-LOC", "B-PER", "E-PER"}) == std::vector<EntitySpan>{{"LOC", 0, 0}, {"PER", 1, 2}});
  CHECK(bio_tags(V{"O", "I-ORG", "I-ORG", "I-LOC"}) == V{"O", "B-ORG", "I-ORG", "B-LOC"});
}

TEST_CASE("precision, recall and F1") {
  const std::vector<std::vector<EntitySpan>> gold{{{"PER", 0, 1}, {"LOC", 3, 3}}};
  const auto same = f1_score(gold, gold);
  CHECK(same.overall.precision() == 100.0);
  CHECK(same.overall.recall() == 100.0);
  CHECK(same.overall.f1() == 100.0);

  const auto none = f1_score(gold, {{}});
  CHECK(none.overall.precision() == 0.0);
  CHECK(none.overall.recall() == 0.0);
  CHECK(none.overall.f1() == 0.0);

  Counts c{8, 6, 5};
  CHECK(format_percent(c.precision()) == "83.33");
  CHECK(format_percent(c.recall()) == "62.50");
  CHECK(format_percent(c.f1()) == "71.43");

  CHECK_THROWS_AS(f1_score(gold, {}), DataError);
}

TEST_CASE("evaluate reports per-type counts and token accuracy") {
  const std::vector<V> gold{{"B-PER", "I-PER", "O", "S-LOC"}}, pred{{"B-PER", "E-PER", "O", "O"}};
  const Evaluation e = evaluate(gold, pred, TagScheme::BIOES);
  CHECK(e.overall.gold == 2);
  CHECK(e.overall.predicted == 1);
  CHECK(e.overall.correct == 1);
  CHECK(e.by_type.at("LOC").gold == 1);
  CHECK(e.by_type.at("LOC").predicted == 0);
  CHECK(e.tokens == 4);
  CHECK(e.correct_tags == 3);
  CHECK(e.accuracy() == 75.0);
}

TEST_CASE("conlleval-format report") {
  const std::vector<V> gold{{"B-PER", "O"}}, pred{{"B-PER", "B-LOC"}};
  const std::string r = conlleval_report(evaluate(gold, pred, TagScheme::BIO));
  CHECK(r ==
        "processed 2 tokens with 1 phrases; found: 2 phrases; correct: 1.\n"
        "accuracy:  50.00%; precision:  50.00%; recall: 100.00%; FB1:  66.67\n"
        "              LOC: precision:   0.00%; recall:   0.00%; FB1:   0.00  1\n"
        "              PER: precision: 100.00%; recall: 100.00%; FB1: 100.00  1\n");
}

TEST_CASE("vocabulary categories") {
  const Vocab train = vocab({"rome", "qux"}), emb = vocab({"rome", "zorb"});
  CHECK(categorize("Rome", train, emb) == VocabCategory::IV);
  CHECK(categorize("Zorb", train, emb) == VocabCategory::OOTV);
  CHECK(categorize("Qux", train, emb) == VocabCategory::OOEV);
  CHECK(categorize("Blarg", train, emb) == VocabCategory::OOBV);
  const std::vector<VocabCategory> cats{VocabCategory::IV, VocabCategory::OOTV, VocabCategory::OOEV};
  CHECK(categorize_span(cats, {"X", 0, 1}) == VocabCategory::OOTV);
  CHECK(categorize_span(cats, {"X", 0, 2}) == VocabCategory::OOEV);
}

TEST_CASE("OOV breakdown: everything in vocabulary") {
  const Corpus test = sentences({{"Rome", "is", "big"}});
  const Vocab both = vocab({"rome", "is", "big"});
  const std::vector<V> gold{{"B-LOC", "O", "O"}}, pred{{"B-LOC", "O", "O"}};
  const auto b = oov_breakdown(test, both, both, gold, pred);
  const auto overall = evaluate(gold, pred, TagScheme::BIO).overall;
  CHECK(b[VocabCategory::IV].gold == overall.gold);
  CHECK(b[VocabCategory::IV].f1() == overall.f1());
  for (auto c : {VocabCategory::OOTV, VocabCategory::OOEV, VocabCategory::OOBV}) {
    CHECK(b[c].gold == 0);
    CHECK(b[c].predicted == 0);
  }
}

TEST_CASE("OOV breakdown: one entity outside both vocabularies") {
  const Corpus test = sentences({{"Blarg", "left"}});
  const Vocab v = vocab({"left"});
  const auto b = oov_breakdown(test, v, v, {{"B-PER", "O"}}, {{"B-PER", "O"}});
  CHECK(b[VocabCategory::OOBV].gold == 1);
  CHECK(b[VocabCategory::OOBV].correct == 1);
  CHECK(b[VocabCategory::IV].gold == 0);
}

TEST_CASE("OOV breakdown: one entity per category") {
  const Corpus test = sentences({{"Rome", "x"}, {"Zorb", "x"}, {"Qux", "x"}, {"Blarg", "x"}});
  const Vocab train = vocab({"rome", "qux", "x"}), emb = vocab({"rome", "zorb", "x"});
  const std::vector<V> gold{{"B-LOC", "O"}, {"B-PER", "O"}, {"B-ORG", "O"}, {"B-MISC", "O"}};
  std::vector<V> pred = gold;
  pred[2] = {"O", "O"};  // the OOEV entity is missed
  const auto b = oov_breakdown(test, train, emb, gold, pred);
  for (auto c : kVocabCategories) CHECK(b[c].gold == 1);
  CHECK(b[VocabCategory::IV].f1() == 100.0);
  CHECK(b[VocabCategory::OOTV].f1() == 100.0);
  CHECK(b[VocabCategory::OOEV].f1() == 0.0);
  CHECK(b[VocabCategory::OOBV].f1() == 100.0);
  std::ostringstream out;
  write_metrics(out, b);
  CHECK(out.str().find("oov.OOEV.f1=0.00") != std::string::npos);
}
