#include "hcner/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <set>
#include <sstream>

namespace hcner {

std::vector<EntitySpan> entity_spans(std::span<const std::string> tags) {
  std::vector<EntitySpan> spans;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    TagParts p = split_tag(tags[i]);
    if (p.prefix == 'S') p.prefix = 'B';
    if (p.prefix == 'E') p.prefix = 'I';
    if (p.prefix == 'B' || (p.prefix == 'I' && !(open && spans.back().type == p.type))) {
      spans.push_back({p.type, i, i});
      open = true;
    } else if (p.prefix == 'I') {
      spans.back().end = i;
    } else {
      open = false;
    }
  }
  return spans;
}

std::vector<std::string> bio_tags(std::span<const std::string> tags) {
  std::vector<std::string> out(tags.size(), "O");
  for (const auto& span : entity_spans(tags)) {
    out[span.start] = join_tag('B', span.type);
    for (std::size_t i = span.start + 1; i <= span.end; ++i) out[i] = join_tag('I', span.type);
  }
  return out;
}

double Counts::precision() const {
  if (predicted == 0) return gold == 0 ? 100.0 : 0.0;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(predicted);
}

double Counts::recall() const {
  if (gold == 0) return predicted == 0 ? 100.0 : 0.0;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(gold);
}

double Counts::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

Counts& Counts::operator+=(const Counts& o) {
  gold += o.gold;
  predicted += o.predicted;
  correct += o.correct;
  return *this;
}

double Evaluation::accuracy() const {
  return tokens > 0 ? 100.0 * static_cast<double>(correct_tags) / static_cast<double>(tokens) : 0.0;
}

Evaluation f1_score(const std::vector<std::vector<EntitySpan>>& gold,
                    const std::vector<std::vector<EntitySpan>>& predicted) {
  if (gold.size() != predicted.size())
    throw DataError("scoring: " + std::to_string(gold.size()) + " gold sentences vs " +
                    std::to_string(predicted.size()) + " predicted");
  Evaluation eval;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const std::set<EntitySpan> g(gold[s].begin(), gold[s].end());
    for (const auto& span : g) {
      ++eval.by_type[span.type].gold;
      ++eval.overall.gold;
    }
    for (const auto& span : std::set<EntitySpan>(predicted[s].begin(), predicted[s].end())) {
      auto& c = eval.by_type[span.type];
      ++c.predicted;
      ++eval.overall.predicted;
      if (g.count(span)) {
        ++c.correct;
        ++eval.overall.correct;
      }
    }
  }
  return eval;
}

Evaluation evaluate(const std::vector<std::vector<std::string>>& gold,
                    const std::vector<std::vector<std::string>>& predicted, TagScheme scheme) {
  if (gold.size() != predicted.size()) throw DataError("scoring: sentence count mismatch");
  std::vector<std::vector<EntitySpan>> gs, ps;
  std::size_t tokens = 0, correct = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != predicted[s].size())
      throw DataError("scoring: sentence " + std::to_string(s) + " length mismatch");
    // Predictions may be invalid under the scheme; spans are read leniently.
    std::vector<std::string> g = gold[s], p = predicted[s];
    if (scheme == TagScheme::BIOES) {
      for (auto* seq : {&g, &p})
        for (auto& t : *seq) {
          TagParts parts = split_tag(t);
          if (parts.prefix == 'S') t = join_tag('B', parts.type);
          if (parts.prefix == 'E') t = join_tag('I', parts.type);
        }
    }
    for (std::size_t i = 0; i < g.size(); ++i) correct += g[i] == p[i];
    tokens += g.size();
    gs.push_back(entity_spans(g));
    ps.push_back(entity_spans(p));
  }
  Evaluation eval = f1_score(gs, ps);
  eval.tokens = tokens;
  eval.correct_tags = correct;
  return eval;
}

namespace {

std::string printf_string(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// conlleval reports 0 for undefined precision and recall in every case.
double conll_precision(const Counts& c) {
  return c.predicted ? 100.0 * static_cast<double>(c.correct) / static_cast<double>(c.predicted) : 0.0;
}
double conll_recall(const Counts& c) {
  return c.gold ? 100.0 * static_cast<double>(c.correct) / static_cast<double>(c.gold) : 0.0;
}
double conll_f1(const Counts& c) {
  const double p = conll_precision(c), r = conll_recall(c);
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace

std::string conlleval_report(const Evaluation& eval) {
  std::string out;
  out += printf_string("processed %zu tokens with %zu phrases; ", eval.tokens, eval.overall.gold);
  out += printf_string("found: %zu phrases; correct: %zu.\n", eval.overall.predicted, eval.overall.correct);
  if (eval.tokens > 0) {
    out += printf_string("accuracy: %6.2f%%; ", eval.accuracy());
    out += printf_string("precision: %6.2f%%; ", conll_precision(eval.overall));
    out += printf_string("recall: %6.2f%%; ", conll_recall(eval.overall));
    out += printf_string("FB1: %6.2f\n", conll_f1(eval.overall));
  }
  for (const auto& [type, c] : eval.by_type) {
    out += printf_string("%17s: ", type.c_str());
    out += printf_string("precision: %6.2f%%; ", conll_precision(c));
    out += printf_string("recall: %6.2f%%; ", conll_recall(c));
    out += printf_string("FB1: %6.2f  %zu\n", conll_f1(c), c.predicted);
  }
  return out;
}

std::string_view to_string(VocabCategory c) {
  switch (c) {
    case VocabCategory::IV: return "IV";
    case VocabCategory::OOTV: return "OOTV";
    case VocabCategory::OOEV: return "OOEV";
    case VocabCategory::OOBV: return "OOBV";
  }
  return "?";
}

VocabCategory categorize(std::string_view surface, const Vocab& train_vocab, const Vocab& embedding_vocab,
                         const Normalization& norm) {
  const std::string w = normalize_word(surface, norm);
  const bool in_train = train_vocab.contains(w);
  const bool in_emb = embedding_vocab.contains(w);
  if (in_train && in_emb) return VocabCategory::IV;
  if (in_emb) return VocabCategory::OOTV;
  if (in_train) return VocabCategory::OOEV;
  return VocabCategory::OOBV;
}

VocabCategory categorize_span(std::span<const VocabCategory> tokens, const EntitySpan& span) {
  auto rank = [](VocabCategory c) {
    switch (c) {
      case VocabCategory::OOBV: return 3;
      case VocabCategory::OOEV: return 2;
      case VocabCategory::OOTV: return 1;
      case VocabCategory::IV: return 0;
    }
    return 0;
  };
  VocabCategory worst = VocabCategory::IV;
  for (std::size_t i = span.start; i <= span.end; ++i)
    if (rank(tokens[i]) > rank(worst)) worst = tokens[i];
  return worst;
}

OovBreakdown oov_breakdown(const Corpus& test, const Vocab& train_vocab, const Vocab& embedding_vocab,
                           const std::vector<std::vector<std::string>>& gold,
                           const std::vector<std::vector<std::string>>& predicted, const Normalization& norm) {
  if (gold.size() != test.size() || predicted.size() != test.size())
    throw DataError("oov breakdown: sentence count mismatch");
  OovBreakdown out;
  for (std::size_t s = 0; s < test.size(); ++s) {
    std::vector<VocabCategory> cats;
    for (const auto& t : test.sentences[s].tokens) cats.push_back(categorize(t.surface, train_vocab, embedding_vocab, norm));
    const auto g = entity_spans(gold[s]);
    const auto p = entity_spans(predicted[s]);
    const std::set<EntitySpan> gset(g.begin(), g.end());
    for (const auto& span : gset) ++out.rows[static_cast<std::size_t>(categorize_span(cats, span))].gold;
    for (const auto& span : std::set<EntitySpan>(p.begin(), p.end())) {
      auto& row = out.rows[static_cast<std::size_t>(categorize_span(cats, span))];
      ++row.predicted;
      if (gset.count(span)) ++row.correct;
    }
  }
  return out;
}

std::string format_percent(double value) { return printf_string("%.2f", value); }

std::string format_evaluation(const Evaluation& eval) {
  std::ostringstream out;
  out << printf_string("%-10s %8s %8s %8s %7s %7s %7s\n", "type", "P", "R", "F1", "gold", "pred", "correct");
  auto row = [&](const std::string& name, const Counts& c) {
    out << printf_string("%-10s %8.2f %8.2f %8.2f %7zu %7zu %7zu\n", name.c_str(), c.precision(), c.recall(), c.f1(),
                         c.gold, c.predicted, c.correct);
  };
  for (const auto& [type, c] : eval.by_type) row(type, c);
  row("overall", eval.overall);
  return out.str();
}

std::string format_oov(const OovBreakdown& oov) {
  std::ostringstream out;
  out << printf_string("%-10s %8s %8s %8s %7s %7s %7s\n", "category", "P", "R", "F1", "gold", "pred", "correct");
  for (VocabCategory c : kVocabCategories) {
    const Counts& r = oov[c];
    out << printf_string("%-10s %8.2f %8.2f %8.2f %7zu %7zu %7zu\n", std::string(to_string(c)).c_str(),
                         r.precision(), r.recall(), r.f1(), r.gold, r.predicted, r.correct);
  }
  return out.str();
}

namespace {

void write_counts(std::ostream& out, const std::string& prefix, const Counts& c) {
  out << prefix << "precision=" << format_percent(c.precision()) << '\n'
      << prefix << "recall=" << format_percent(c.recall()) << '\n'
      << prefix << "f1=" << format_percent(c.f1()) << '\n'
      << prefix << "gold=" << c.gold << '\n'
      << prefix << "predicted=" << c.predicted << '\n'
      << prefix << "correct=" << c.correct << '\n';
}

}  // namespace

void write_metrics(std::ostream& out, const Evaluation& eval, const std::string& prefix) {
  out << prefix << "tokens=" << eval.tokens << '\n';
  out << prefix << "accuracy=" << format_percent(eval.accuracy()) << '\n';
  write_counts(out, prefix, eval.overall);
  for (const auto& [type, c] : eval.by_type) write_counts(out, prefix + "type." + type + ".", c);
}

void write_metrics(std::ostream& out, const OovBreakdown& oov, const std::string& prefix) {
  for (VocabCategory c : kVocabCategories) write_counts(out, prefix + std::string(to_string(c)) + ".", oov[c]);
}

}  // namespace hcner
