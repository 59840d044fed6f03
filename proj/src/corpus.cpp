#include "hcner/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace hcner {

namespace {

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

char32_t lower_codepoint(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  // Latin-1 supplement, skipping the multiplication sign.
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  return c;
}

}  // namespace

std::string_view to_string(TagScheme scheme) { return scheme == TagScheme::BIO ? "BIO" : "BIOES"; }

TagScheme parse_scheme(std::string_view name) {
  if (name == "BIO" || name == "bio") return TagScheme::BIO;
  if (name == "BIOES" || name == "bioes") return TagScheme::BIOES;
  throw ConfigError("unknown tag scheme '" + std::string(name) + "'");
}

Token make_token(std::string surface, std::string tag) {
  Token t;
  t.chars = decode_utf8(surface);
  t.surface = std::move(surface);
  t.tag = std::move(tag);
  return t;
}

std::vector<std::string> Sentence::tags() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.tag);
  return out;
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

Corpus parse_conll(std::istream& in, ColumnMap columns, TagScheme scheme) {
  Corpus corpus;
  Sentence current;
  current.scheme = scheme;
  auto flush = [&] {
    if (!current.tokens.empty()) corpus.sentences.push_back(std::move(current));
    current = Sentence{};
    current.scheme = scheme;
  };

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (is_blank(line)) {
      flush();
      continue;
    }
    const auto fields = split_whitespace(line);
    if (fields.size() < 2) throw ParseError("expected at least 2 columns", line_no);
    if (fields[0] == "-DOCSTART-") {
      flush();
      continue;
    }
    auto pick = [&](int col) -> std::string_view {
      const int n = static_cast<int>(fields.size());
      const int idx = col < 0 ? n + col : col;
      if (idx < 0 || idx >= n) throw ParseError("column " + std::to_string(col) + " out of range", line_no);
      return fields[static_cast<std::size_t>(idx)];
    };
    current.tokens.push_back(make_token(std::string(pick(columns.word)), std::string(pick(columns.tag))));
  }
  flush();
  return corpus;
}

Corpus read_conll(const std::filesystem::path& path, ColumnMap columns, TagScheme scheme) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_conll(in, columns, scheme);
}

void write_conll(std::ostream& out, const Corpus& corpus) {
  for (const auto& s : corpus.sentences) {
    for (const auto& t : s.tokens) out << t.surface << ' ' << t.tag << '\n';
    out << '\n';
  }
}

void write_conll(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_conll(out, corpus);
}

std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + static_cast<std::size_t>(len) <= text.size();
    for (int k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + static_cast<std::size_t>(k)]);
      if ((b & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

std::string encode_utf8(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t c : text) {
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (c >> 12)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (c >> 18)));
      out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

// ---- tags -------------------------------------------------------------

TagParts split_tag(std::string_view tag) {
  if (tag == "O") return {};
  if (tag.size() < 3 || tag[1] != '-') return {'?', std::string(tag)};
  return {tag[0], std::string(tag.substr(2))};
}

std::string join_tag(char prefix, std::string_view type) {
  if (prefix == 'O') return "O";
  std::string out(1, prefix);
  out += '-';
  out += type;
  return out;
}

std::optional<std::size_t> first_invalid_tag(std::span<const std::string> tags, TagScheme scheme) {
  const std::string_view prefixes = scheme == TagScheme::BIO ? "OBI" : "OBIES";
  // Type of the entity left open by the previous tag, if any.
  std::optional<std::string> open;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const TagParts p = split_tag(tags[i]);
    if (prefixes.find(p.prefix) == std::string_view::npos) return i;
    if (p.prefix != 'O' && p.type.empty()) return i;

    if (scheme == TagScheme::BIO) {
      if (p.prefix == 'I' && (!open || *open != p.type)) return i;
      open = p.prefix == 'O' ? std::nullopt : std::optional<std::string>(p.type);
    } else {
      const bool continues = p.prefix == 'I' || p.prefix == 'E';
      if (open) {
        if (!continues || p.type != *open) return i;
      } else if (continues) {
        return i;
      }
      open = (p.prefix == 'B' || p.prefix == 'I') ? std::optional<std::string>(p.type) : std::nullopt;
    }
  }
  if (scheme == TagScheme::BIOES && open) return tags.size() - 1;
  return std::nullopt;
}

void validate_tags(std::span<const std::string> tags, TagScheme scheme) {
  if (auto bad = first_invalid_tag(tags, scheme)) {
    throw TagError("'" + tags[*bad] + "' is invalid under " + std::string(to_string(scheme)), *bad);
  }
}

void validate_corpus(const Corpus& corpus) {
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto tags = corpus.sentences[s].tags();
    if (auto bad = first_invalid_tag(tags, corpus.sentences[s].scheme)) {
      throw TagError("sentence " + std::to_string(s) + ": '" + tags[*bad] + "' is invalid", *bad);
    }
  }
}

std::vector<std::string> convert_tags(std::span<const std::string> tags, TagScheme from, TagScheme to) {
  validate_tags(tags, from);
  std::vector<std::string> out(tags.begin(), tags.end());
  if (from == to) return out;

  if (to == TagScheme::BIO) {
    for (auto& t : out) {
      const TagParts p = split_tag(t);
      if (p.prefix == 'S') t = join_tag('B', p.type);
      if (p.prefix == 'E') t = join_tag('I', p.type);
    }
    return out;
  }

  for (std::size_t i = 0; i < tags.size(); ++i) {
    const TagParts p = split_tag(tags[i]);
    if (p.prefix == 'O') continue;
    const bool next_continues =
        i + 1 < tags.size() && split_tag(tags[i + 1]).prefix == 'I';
    if (p.prefix == 'B') out[i] = join_tag(next_continues ? 'B' : 'S', p.type);
    if (p.prefix == 'I') out[i] = join_tag(next_continues ? 'I' : 'E', p.type);
  }
  return out;
}

Sentence convert_sentence(const Sentence& sentence, TagScheme to) {
  Sentence out = sentence;
  const auto converted = convert_tags(sentence.tags(), sentence.scheme, to);
  for (std::size_t i = 0; i < out.tokens.size(); ++i) out.tokens[i].tag = converted[i];
  out.scheme = to;
  return out;
}

Corpus convert_corpus(const Corpus& corpus, TagScheme to) {
  Corpus out;
  out.sentences.reserve(corpus.size());
  for (const auto& s : corpus.sentences) out.sentences.push_back(convert_sentence(s, to));
  return out;
}

std::vector<std::string> entity_types(const Corpus& corpus) {
  std::vector<std::string> types;
  for (const auto& s : corpus.sentences)
    for (const auto& t : s.tokens) {
      const TagParts p = split_tag(t.tag);
      if (p.prefix != 'O' && std::find(types.begin(), types.end(), p.type) == types.end())
        types.push_back(p.type);
    }
  std::sort(types.begin(), types.end());
  return types;
}

TagSet::TagSet(std::vector<std::string> types, TagScheme scheme) : types_(std::move(types)), scheme_(scheme) {
  tags_.push_back("O");
  const std::string_view prefixes = scheme == TagScheme::BIO ? "BI" : "BIES";
  for (const auto& type : types_)
    for (char p : prefixes) tags_.push_back(join_tag(p, type));
  for (std::size_t i = 0; i < tags_.size(); ++i) index_.emplace(tags_[i], static_cast<int>(i));
}

int TagSet::id(std::string_view tag) const {
  auto it = index_.find(std::string(tag));
  if (it == index_.end()) throw DataError("unknown tag '" + std::string(tag) + "'");
  return it->second;
}

bool TagSet::allowed(int from, int to) const {
  const TagParts a = split_tag(tag(from));
  const TagParts b = split_tag(tag(to));
  if (scheme_ == TagScheme::BIO) {
    return b.prefix != 'I' || ((a.prefix == 'B' || a.prefix == 'I') && a.type == b.type);
  }
  const bool open = a.prefix == 'B' || a.prefix == 'I';
  const bool continues = b.prefix == 'I' || b.prefix == 'E';
  return open ? (continues && a.type == b.type) : !continues;
}

bool TagSet::allowed_start(int t) const {
  const char p = split_tag(tag(t)).prefix;
  return p != 'I' && p != 'E';
}

bool TagSet::allowed_end(int t) const {
  if (scheme_ == TagScheme::BIO) return true;
  const char p = split_tag(tag(t)).prefix;
  return p != 'B' && p != 'I';
}

// ---- vocabularies -------------------------------------------------------

std::string normalize_word(std::string_view surface, const Normalization& norm) {
  std::u32string cps = decode_utf8(surface);
  for (auto& c : cps) {
    if (norm.lowercase) c = lower_codepoint(c);
    if (norm.zero_digits && c >= U'0' && c <= U'9') c = U'0';
  }
  return encode_utf8(cps);
}

Vocab::Vocab() {
  add("<pad>");
  add("<unk>");
}

int Vocab::add(const std::string& word) {
  auto [it, inserted] = index_.emplace(word, static_cast<int>(words_.size()));
  if (inserted) words_.push_back(word);
  return it->second;
}

int Vocab::lookup(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it != index_.end() && it->second != kPad && it->second != kUnk;
}

namespace {

Vocab vocab_from_counts(const std::map<std::string, std::size_t>& counts, std::size_t min_freq) {
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (const auto& [w, c] : counts)
    if (c >= min_freq) entries.emplace_back(w, c);
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (const auto& e : entries) v.add(e.first);
  return v;
}

}  // namespace

Vocab build_vocab(const Corpus& corpus, std::size_t min_freq, const Normalization& norm) {
  if (min_freq < 1) throw ConfigError("min_freq must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : corpus.sentences)
    for (const auto& t : s.tokens) ++counts[normalize_word(t.surface, norm)];
  return vocab_from_counts(counts, min_freq);
}

Vocab build_char_vocab(const Corpus& corpus) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : corpus.sentences)
    for (const auto& t : s.tokens)
      for (char32_t c : t.chars) ++counts[encode_utf8(std::u32string_view(&c, 1))];
  return vocab_from_counts(counts, 1);
}

EmbeddingTable random_embeddings(const Vocab& vocab, int dim, Rng& rng) {
  if (dim <= 0) throw ConfigError("embedding dimension must be positive");
  EmbeddingTable table;
  table.dim = dim;
  table.matrix.resize(vocab.size(), dim);
  table.pretrained.assign(static_cast<std::size_t>(vocab.size()), false);
  const double bound = std::sqrt(3.0 / dim);
  for (int r = 0; r < vocab.size(); ++r)
    for (int c = 0; c < dim; ++c) table.matrix(r, c) = static_cast<float>(uniform(rng, -bound, bound));
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocab& vocab, int dim,
                               Rng& rng, const Normalization& norm) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  EmbeddingTable table = random_embeddings(vocab, dim, rng);

  std::string raw;
  std::size_t line_no = 0;
  std::size_t found = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (is_blank(line)) continue;
    const auto fields = split_whitespace(line);
    // word2vec-style "count dim" header
    if (line_no == 1 && fields.size() == 2 && fields[0].find_first_not_of("0123456789") == std::string_view::npos &&
        fields[1].find_first_not_of("0123456789") == std::string_view::npos)
      continue;
    if (static_cast<int>(fields.size()) != dim + 1) {
      throw ParseError("expected " + std::to_string(dim) + " values, found " +
                           std::to_string(fields.size() - 1),
                       line_no);
    }
    const int id = vocab.lookup(normalize_word(fields[0], norm));
    if (id == Vocab::kUnk || id == Vocab::kPad || table.pretrained[static_cast<std::size_t>(id)]) continue;
    for (int c = 0; c < dim; ++c) {
      const auto f = fields[static_cast<std::size_t>(c) + 1];
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        throw ParseError("bad value '" + std::string(f) + "'", line_no);
      table.matrix(id, c) = v;
    }
    table.pretrained[static_cast<std::size_t>(id)] = true;
    ++found;
  }
  const int regular = vocab.size() - 2;
  table.coverage = regular > 0 ? static_cast<double>(found) / regular : 0.0;
  return table;
}

std::unordered_set<std::string> embedding_words(const std::filesystem::path& path, const Normalization& norm) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::unordered_set<std::string> words;
  std::string raw;
  bool first = true;
  while (std::getline(in, raw)) {
    const auto fields = split_whitespace(strip_cr(raw));
    if (fields.empty()) continue;
    if (first && fields.size() == 2 && fields[0].find_first_not_of("0123456789") == std::string_view::npos) {
      first = false;
      continue;
    }
    first = false;
    words.insert(normalize_word(fields[0], norm));
  }
  return words;
}

}  // namespace hcner
