#include <doctest.h>

#include <set>

#include "hcner/synthetic.hpp"

using namespace hcner;

namespace {

SyntheticConfig small() {
  SyntheticConfig c;
  c.train_sentences = 300;
  c.dev_sentences = 60;
  c.test_sentences = 60;
  return c;
}

std::set<std::string> types_of(const Corpus& corpus) {
  std::set<std::string> out;
  for (const auto& s : corpus.sentences)
    for (const auto& t : s.tokens)
      if (t.tag != "O") out.insert(t.tag.substr(2));
  return out;
}

}  // namespace

TEST_CASE("sizes, types and valid tags") {
  const auto d = generate_synthetic(small());
  CHECK(d.train.size() == 300);
  CHECK(d.dev.size() == 60);
  CHECK(d.test.size() == 60);
  CHECK(types_of(d.train) == std::set<std::string>{"LOC", "MISC", "ORG", "PER"});
  for (const Corpus* c : {&d.train, &d.dev, &d.test})
    for (const auto& s : c->sentences) {
      std::vector<std::string> tags;
      for (const auto& t : s.tokens) tags.push_back(t.tag);
      CHECK_FALSE(first_invalid_tag(tags, TagScheme::BIO).has_value());
    }
  CHECK(d.ambiguous.size() == 4 * 5);
  REQUIRE_FALSE(d.embeddings.empty());
  CHECK(d.embeddings.front().second.size() == 100);
}

TEST_CASE("ambiguous names are rare in training and present in evaluation") {
  const SyntheticConfig c = small();
  const auto d = generate_synthetic(c);
  const std::set<std::string> amb(d.ambiguous.begin(), d.ambiguous.end());
  auto count = [&](const Corpus& corpus) {
    std::map<std::string, int> n;
    for (const auto& s : corpus.sentences)
      for (const auto& t : s.tokens)
        if (amb.count(t.surface)) ++n[t.surface];
    return n;
  };
  const auto train = count(d.train);
  CHECK(train.size() == amb.size());
  for (const auto& [w, n] : train) CHECK(n == c.ambiguous_train_occurrences);
  int eval = 0;
  for (const auto& [w, n] : count(d.test)) eval += n;
  CHECK(eval > 0);
}

TEST_CASE("same seed gives the same corpus; a new seed does not") {
  SyntheticConfig c = small();
  const auto a = generate_synthetic(c), b = generate_synthetic(c);
  c.seed = 8;
  const auto other = generate_synthetic(c);
  auto flat = [](const Corpus& corpus) {
    std::vector<std::string> out;
    for (const auto& s : corpus.sentences)
      for (const auto& t : s.tokens) out.push_back(t.surface + "/" + t.tag);
    return out;
  };
  CHECK(flat(a.train) == flat(b.train));
  CHECK(flat(a.test) == flat(b.test));
  CHECK(a.embeddings == b.embeddings);
  CHECK(flat(a.train) != flat(other.train));
}

TEST_CASE("subset scoring keeps only spans touching the chosen words") {
  Corpus c;
  Sentence s;
  for (const char* w : {"Zorb", "met", "Kal", "Vin", "today"}) s.tokens.push_back(make_token(w, "O"));
  c.sentences.push_back(s);
  const std::vector<std::vector<std::string>> gold{{"B-PER", "O", "B-LOC", "I-LOC", "O"}};
  const std::vector<std::vector<std::string>> pred{{"B-ORG", "O", "B-LOC", "I-LOC", "B-MISC"}};
  const Counts zorb = subset_counts(c, gold, pred, {"Zorb"});
  CHECK(zorb.gold == 1);
  CHECK(zorb.predicted == 1);
  CHECK(zorb.correct == 0);
  const Counts vin = subset_counts(c, gold, pred, {"Vin"});
  CHECK(vin.gold == 1);
  CHECK(vin.predicted == 1);
  CHECK(vin.correct == 1);
  const Counts none = subset_counts(c, gold, pred, {"met"});
  CHECK(none.gold + none.predicted == 0);
  CHECK_THROWS_AS(subset_counts(c, gold, {}, {"Vin"}), DataError);
}
