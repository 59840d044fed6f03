#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hcner/corpus.hpp"

namespace hcner {

struct EntitySpan {
  std::string type;
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive

  auto operator<=>(const EntitySpan&) const = default;
};

// Maximal typed spans of a BIO sequence. A stray I- (after O or after a
// different type) opens a new span, as conlleval does.
std::vector<EntitySpan> entity_spans(std::span<const std::string> tags);

// Canonical valid BIO sequence with exactly the spans entity_spans() reads
// from `tags` (BIOES input is accepted).
std::vector<std::string> bio_tags(std::span<const std::string> tags);

struct Counts {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  // Percentages. Undefined ratios are reported as 0, except that two empty
  // span sets agree perfectly.
  double precision() const;
  double recall() const;
  double f1() const;

  Counts& operator+=(const Counts& o);
};

struct Evaluation {
  Counts overall;
  std::map<std::string, Counts> by_type;
  std::size_t tokens = 0;
  std::size_t correct_tags = 0;

  double accuracy() const;
};

// Exact-match scoring on (type, start, end) per aligned sentence.
Evaluation f1_score(const std::vector<std::vector<EntitySpan>>& gold,
                    const std::vector<std::vector<EntitySpan>>& predicted);

// Tag-level entry point: both sides are converted to BIO, scored on spans,
// and token accuracy is filled in.
Evaluation evaluate(const std::vector<std::vector<std::string>>& gold,
                    const std::vector<std::vector<std::string>>& predicted, TagScheme scheme);

// Text identical to conlleval's summary output.
std::string conlleval_report(const Evaluation& eval);

enum class VocabCategory { IV = 0, OOTV = 1, OOEV = 2, OOBV = 3 };
inline constexpr std::array<VocabCategory, 4> kVocabCategories{VocabCategory::IV, VocabCategory::OOTV,
                                                               VocabCategory::OOEV, VocabCategory::OOBV};

std::string_view to_string(VocabCategory c);

VocabCategory categorize(std::string_view surface, const Vocab& train_vocab, const Vocab& embedding_vocab,
                         const Normalization& norm = {});

// An entity is OOBV if any token is OOBV, else OOEV if any token is OOEV,
// else OOTV if any token is OOTV, else IV.
VocabCategory categorize_span(std::span<const VocabCategory> tokens, const EntitySpan& span);

struct OovBreakdown {
  std::array<Counts, 4> rows;
  const Counts& operator[](VocabCategory c) const { return rows[static_cast<std::size_t>(c)]; }
};

// `gold` and `predicted` are BIO tag sequences aligned with `test`.
OovBreakdown oov_breakdown(const Corpus& test, const Vocab& train_vocab, const Vocab& embedding_vocab,
                           const std::vector<std::vector<std::string>>& gold,
                           const std::vector<std::vector<std::string>>& predicted, const Normalization& norm = {});

std::string format_percent(double value);

// Human-readable tables.
std::string format_evaluation(const Evaluation& eval);
std::string format_oov(const OovBreakdown& oov);

// Line-oriented key=value metrics.
void write_metrics(std::ostream& out, const Evaluation& eval, const std::string& prefix = "");
void write_metrics(std::ostream& out, const OovBreakdown& oov, const std::string& prefix = "oov.");

}  // namespace hcner
