#include "hcner/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

namespace hcner {

namespace {

const std::vector<std::string> kTypes{"LOC", "MISC", "ORG", "PER"};

const std::vector<std::string> kSyllables{"ka", "lo", "mi", "ra", "ten", "vor", "bel", "dun", "sa", "ri",
                                          "po", "gan", "tel", "mur", "zi", "fen", "ol", "ba", "cor", "len",
                                          "du", "ves", "ni", "tar", "ho", "quen", "ab", "ir", "sel", "go"};

const std::vector<std::string> kNouns{"market", "report",  "plan",    "budget",  "season",  "project", "team",
                                      "deal",   "bridge",  "road",    "school",  "harvest", "council", "price",
                                      "vote",   "match",   "museum",  "factory", "river",   "contract", "law",
                                      "policy", "meeting", "program", "station", "survey",  "stadium",
                                      "loan",   "network", "election", "strike", "profit",  "campaign", "agreement"};
const std::vector<std::string> kVerbs{"approved", "criticized", "reviewed", "rejected", "praised",  "delayed",
                                      "signed",   "visited",    "opened",   "closed",   "supported", "announced",
                                      "funded",   "questioned", "expanded", "reported", "blocked",  "welcomed"};
const std::vector<std::string> kAdjectives{"new",   "large",  "small",   "final",  "strong", "weak",   "early",
                                           "late",  "local",  "major",   "quiet",  "busy",   "modern", "historic",
                                           "rapid", "recent", "popular", "costly", "formal", "annual"};
const std::vector<std::string> kTimes{"monday",   "tuesday", "wednesday", "thursday", "friday",
                                      "saturday", "sunday",  "week",      "month",    "year"};

struct Template {
  std::vector<std::string> tokens;
  std::string focus;  // entity type the context pins down; empty for neutral templates
};

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto j = s.find(' ', i);
    out.push_back(s.substr(i, j - i));
    if (j == std::string::npos) break;
    i = j + 1;
  }
  return out;
}

std::vector<Template> typed_templates() {
  const std::vector<std::pair<std::string, std::string>> raw{
      {"PER", "{PER} said on {T} that the {N} was {A} ."},
      {"PER", "mr. {PER} {V} the {N} in {LOC} ."},
      {"PER", "according to {PER} , the {N} will be {A} ."},
      {"PER", "{PER} , the {A} coach , resigned on {T} ."},
      {"PER", "spokesman {PER} declined to comment on the {N} ."},
      {"PER", "the {N} was signed by president {PER} ."},
      {"LOC", "the {N} in {LOC} was {A} on {T} ."},
      {"LOC", "they travelled to {LOC} last {T} ."},
      {"LOC", "heavy rain fell across {LOC} and {LOC} ."},
      {"LOC", "the embassy in {LOC} {V} the {N} ."},
      {"LOC", "flights from {LOC} were cancelled on {T} ."},
      {"LOC", "the capital of {LOC} hosted the {A} {N} ."},
      {"ORG", "shares of {ORG} rose {NUM} percent on {T} ."},
      {"ORG", "{ORG} announced a {A} {N} worth {NUM} million ."},
      {"ORG", "analysts at {ORG} {V} the {N} ."},
      {"ORG", "{PER} joined {ORG} as chairman ."},
      {"ORG", "the board of {ORG} {V} the {N} ."},
      {"ORG", "a merger between {ORG} and {ORG} was {V} ."},
      {"MISC", "the {MISC} festival drew {NUM} visitors ."},
      {"MISC", "{MISC} speakers {V} the {A} {N} ."},
      {"MISC", "he won the {MISC} cup in {LOC} ."},
      {"MISC", "the {A} {MISC} tradition continued this {T} ."},
      {"MISC", "fans celebrated the {MISC} championship on {T} ."},
      {"MISC", "a {MISC} dialect is spoken near the {N} ."},
  };
  std::vector<Template> out;
  for (const auto& [type, text] : raw) out.push_back({split_words(text), type});
  return out;
}

std::vector<Template> neutral_templates() {
  const std::vector<std::string> raw{
      "{ANY} was mentioned in the {N} on {T} .",
      "reporters wrote about {ANY} again .",
      "nobody expected {ANY} to appear in the {N} .",
      "the {N} about {ANY} was {A} .",
      "there was little news about {ANY} this {T} .",
      "the {A} {N} referred to {ANY} twice .",
  };
  std::vector<Template> out;
  for (const auto& text : raw) out.push_back({split_words(text), ""});
  return out;
}

std::string slot_type(const std::string& token) {
  if (token.size() > 2 && token.front() == '{' && token.back() == '}') return token.substr(1, token.size() - 2);
  return "";
}

using Name = std::vector<std::string>;

class Generator {
 public:
  explicit Generator(const SyntheticConfig& cfg) : cfg_(cfg), rng_(derive_seed(cfg.seed, {0})) {
    for (const auto* list : {&kNouns, &kVerbs, &kAdjectives, &kTimes}) common_.insert(list->begin(), list->end());
    for (const auto& t : typed_templates())
      for (const auto& w : t.tokens) common_.insert(w);
    for (const auto& t : neutral_templates())
      for (const auto& w : t.tokens) common_.insert(w);

    for (const auto& type : kTypes) {
      auto& names = names_[type];
      for (int i = 0; i < cfg_.names_per_type; ++i) {
        Name n{pseudo_word()};
        if (uniform01(rng_) < cfg_.multiword_rate) n.push_back(pseudo_word());
        names.push_back(n);
      }
      for (int i = 0; i < cfg_.ambiguous_per_type; ++i) {
        const std::string w = pseudo_word();
        ambiguous_.push_back({w, type});
      }
      for (int i = 0; i < cfg_.unseen_per_type; ++i) unseen_[type].push_back({pseudo_word()});
    }
  }

  SyntheticCorpus run() {
    SyntheticCorpus out;
    out.types = kTypes;
    for (const auto& [w, t] : ambiguous_) out.ambiguous.push_back(w);

    // Training: ordinary sentences plus a few typed occurrences of every
    // ambiguous name.
    std::vector<Sentence> train;
    for (const auto& [w, type] : ambiguous_)
      for (int k = 0; k < cfg_.ambiguous_train_occurrences; ++k) train.push_back(typed_with(type, {w}, false));
    while (train.size() < cfg_.train_sentences) train.push_back(ordinary(false));
    shuffle(train.begin(), train.end(), rng_);
    train.resize(cfg_.train_sentences);
    out.train.sentences = std::move(train);

    out.dev.sentences = evaluation_split(cfg_.dev_sentences);
    out.test.sentences = evaluation_split(cfg_.test_sentences);
    out.embeddings = embeddings(out);
    return out;
  }

 private:
  std::string pseudo_word() {
    for (;;) {
      const std::size_t parts = 2 + uniform_index(rng_, 2);
      std::string w;
      for (std::size_t i = 0; i < parts; ++i) w += kSyllables[uniform_index(rng_, kSyllables.size())];
      if (used_.count(w) || common_.count(w)) continue;
      used_.insert(w);
      w[0] = static_cast<char>(w[0] - 'a' + 'A');
      return w;
    }
  }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[uniform_index(rng_, v.size())];
  }

  Name entity(const std::string& type, bool allow_unseen) {
    if (allow_unseen && uniform01(rng_) < 0.05) return pick(unseen_[type]);
    return pick(names_[type]);
  }

  // Fills a template; `forced` replaces the first slot of the focus type (or
  // the neutral slot).
  Sentence fill(const Template& t, const Name* forced, const std::string& forced_type, bool allow_unseen) {
    Sentence s;
    bool used_forced = false;
    for (const auto& tok : t.tokens) {
      const std::string slot = slot_type(tok);
      auto add_entity = [&](const Name& name, const std::string& type) {
        for (std::size_t i = 0; i < name.size(); ++i) s.tokens.push_back(make_token(name[i], join_tag(i ? 'I' : 'B', type)));
      };
      if (slot == "N") {
        s.tokens.push_back(make_token(pick(kNouns), "O"));
      } else if (slot == "V") {
        s.tokens.push_back(make_token(pick(kVerbs), "O"));
      } else if (slot == "A") {
        s.tokens.push_back(make_token(pick(kAdjectives), "O"));
      } else if (slot == "T") {
        s.tokens.push_back(make_token(pick(kTimes), "O"));
      } else if (slot == "NUM") {
        s.tokens.push_back(make_token(std::to_string(1 + uniform_index(rng_, 999)), "O"));
      } else if (slot == "ANY") {
        if (forced && !used_forced) {
          add_entity(*forced, forced_type);
          used_forced = true;
        } else {
          const std::string& type = pick(kTypes);
          add_entity(entity(type, false), type);
        }
      } else if (!slot.empty()) {
        if (forced && !used_forced && slot == forced_type) {
          add_entity(*forced, forced_type);
          used_forced = true;
        } else {
          add_entity(entity(slot, allow_unseen), slot);
        }
      } else {
        s.tokens.push_back(make_token(tok, "O"));
      }
    }
    return s;
  }

  Sentence typed_with(const std::string& type, const Name& name, bool allow_unseen) {
    std::vector<const Template*> options;
    for (const auto& t : typed_) {
      if (t.focus != type) continue;
      // The forced name must land in a slot of its own type.
      if (std::find(t.tokens.begin(), t.tokens.end(), "{" + type + "}") != t.tokens.end()) options.push_back(&t);
    }
    return fill(*pick(options), &name, type, allow_unseen);
  }

  Sentence ordinary(bool eval) {
    if (uniform01(rng_) < cfg_.neutral_rate) return fill(pick(neutral_), nullptr, "", false);
    return fill(pick(typed_), nullptr, "", eval);
  }

  std::vector<Sentence> evaluation_split(std::size_t count) {
    std::vector<Sentence> out;
    const auto ambiguous = static_cast<std::size_t>(cfg_.ambiguous_eval_rate * static_cast<double>(count) + 0.5);
    for (std::size_t i = 0; i < ambiguous && !ambiguous_.empty(); ++i) {
      const auto& [w, type] = ambiguous_[i % ambiguous_.size()];
      const Name name{w};
      out.push_back(fill(pick(neutral_), &name, type, false));
    }
    while (out.size() < count) out.push_back(ordinary(true));
    shuffle(out.begin(), out.end(), rng_);
    return out;
  }

  std::vector<std::pair<std::string, std::vector<float>>> embeddings(const SyntheticCorpus& data) {
    Rng erng(derive_seed(cfg_.seed, {1}));
    std::set<std::string> words;
    for (const Corpus* c : {&data.train, &data.dev, &data.test})
      for (const auto& s : c->sentences)
        for (const auto& t : s.tokens) words.insert(normalize_word(t.surface));
    std::vector<std::string> listed;
    for (const auto& w : words)
      if (uniform01(erng) >= cfg_.embedding_omit_rate) listed.push_back(w);
    for (int i = 0; i < cfg_.embedding_distractors; ++i) listed.push_back(normalize_word(pseudo_word()));

    const double bound = std::sqrt(3.0 / cfg_.embedding_dim);
    std::vector<std::pair<std::string, std::vector<float>>> out;
    for (const auto& w : listed) {
      std::vector<float> v(static_cast<std::size_t>(cfg_.embedding_dim));
      for (auto& x : v) x = static_cast<float>(uniform(erng, -bound, bound));
      out.emplace_back(w, std::move(v));
    }
    return out;
  }

  SyntheticConfig cfg_;
  Rng rng_;
  std::unordered_set<std::string> common_;
  std::unordered_set<std::string> used_;
  std::map<std::string, std::vector<Name>> names_;
  std::map<std::string, std::vector<Name>> unseen_;
  std::vector<std::pair<std::string, std::string>> ambiguous_;
  std::vector<Template> typed_ = typed_templates();
  std::vector<Template> neutral_ = neutral_templates();
};

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& config) { return Generator(config).run(); }

void write_synthetic(const std::filesystem::path& dir, const SyntheticCorpus& data) {
  std::filesystem::create_directories(dir);
  write_conll(dir / "train.txt", data.train);
  write_conll(dir / "dev.txt", data.dev);
  write_conll(dir / "test.txt", data.test);
  std::ofstream emb(dir / "embeddings.txt");
  char buf[32];
  for (const auto& [w, v] : data.embeddings) {
    emb << w;
    for (float x : v) {
      std::snprintf(buf, sizeof buf, " %.6f", x);
      emb << buf;
    }
    emb << '\n';
  }
  std::ofstream amb(dir / "ambiguous.txt");
  for (const auto& w : data.ambiguous) amb << w << '\n';
  if (!emb || !amb) throw DataError("failed writing synthetic corpus to " + dir.string());
}

Counts subset_counts(const Corpus& corpus, const std::vector<std::vector<std::string>>& gold,
                     const std::vector<std::vector<std::string>>& predicted,
                     const std::unordered_set<std::string>& words) {
  if (gold.size() != corpus.size() || predicted.size() != corpus.size())
    throw DataError("subset scoring: sentence count mismatch");
  Counts out;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto& tokens = corpus.sentences[s].tokens;
    auto covers = [&](const EntitySpan& span) {
      for (std::size_t i = span.start; i <= span.end; ++i)
        if (words.count(tokens[i].surface)) return true;
      return false;
    };
    std::set<EntitySpan> g;
    for (const auto& span : entity_spans(gold[s]))
      if (covers(span)) g.insert(span);
    out.gold += g.size();
    const auto pred = entity_spans(predicted[s]);
    for (const auto& span : std::set<EntitySpan>(pred.begin(), pred.end())) {
      if (!covers(span)) continue;
      ++out.predicted;
      out.correct += g.count(span);
    }
  }
  return out;
}

}  // namespace hcner
