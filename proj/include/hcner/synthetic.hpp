#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "hcner/corpus.hpp"
#include "hcner/eval.hpp"

namespace hcner {

// Generated NER data. Entity names are pseudo-words drawn from one syllable
// pool, so spelling carries no type information; the type of an ordinary
// name follows from the template it appears in. Ambiguous names occur in
// training only a few times, always in typed templates, and in dev/test only
// in neutral templates, so their type can be recovered from other
// occurrences of the same word but not from the sentence itself.
struct SyntheticConfig {
  std::size_t train_sentences = 2000;
  std::size_t dev_sentences = 200;
  std::size_t test_sentences = 200;
  std::uint64_t seed = 7;

  int names_per_type = 30;
  int ambiguous_per_type = 5;
  int ambiguous_train_occurrences = 3;
  int unseen_per_type = 5;               // dev/test-only names, typed contexts only
  double neutral_rate = 0.25;            // share of ordinary sentences using neutral templates
  double ambiguous_eval_rate = 0.12;     // share of dev/test sentences built around an ambiguous name
  double multiword_rate = 0.25;          // ordinary names made of two pseudo-words
  double embedding_omit_rate = 0.08;     // corpus words left out of the embedding file
  int embedding_dim = 100;
  int embedding_distractors = 50;        // extra file words not in any split
};

struct SyntheticCorpus {
  Corpus train;
  Corpus dev;
  Corpus test;
  std::vector<std::string> types;
  std::vector<std::string> ambiguous;  // surface forms
  std::vector<std::pair<std::string, std::vector<float>>> embeddings;
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& config);

// Writes train.txt, dev.txt, test.txt, embeddings.txt and ambiguous.txt.
void write_synthetic(const std::filesystem::path& dir, const SyntheticCorpus& data);

// Scores only the spans (gold or predicted) that cover at least one token
// whose surface is in `words`.
Counts subset_counts(const Corpus& corpus, const std::vector<std::vector<std::string>>& gold,
                     const std::vector<std::vector<std::string>>& predicted,
                     const std::unordered_set<std::string>& words);

}  // namespace hcner
