#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "hcner/error.hpp"
#include "hcner/random.hpp"

namespace hcner {

enum class TagScheme { BIO, BIOES };

std::string_view to_string(TagScheme scheme);
TagScheme parse_scheme(std::string_view name);

struct Token {
  std::string surface;
  std::u32string chars;
  std::string tag;
};

Token make_token(std::string surface, std::string tag);

struct Sentence {
  std::vector<Token> tokens;
  TagScheme scheme = TagScheme::BIO;

  std::size_t size() const { return tokens.size(); }
  std::vector<std::string> tags() const;
};

struct Corpus {
  std::vector<Sentence> sentences;

  std::size_t size() const { return sentences.size(); }
  bool empty() const { return sentences.empty(); }
  std::size_t token_count() const;
};

// Column indices; negative values count from the end of the line.
struct ColumnMap {
  int word = 0;
  int tag = -1;
};

// Blank lines separate sentences and "-DOCSTART-" lines are skipped. Throws
// ParseError (with a 1-based line number) on lines with fewer than two columns.
Corpus read_conll(const std::filesystem::path& path, ColumnMap columns = {},
                  TagScheme scheme = TagScheme::BIO);
Corpus parse_conll(std::istream& in, ColumnMap columns = {}, TagScheme scheme = TagScheme::BIO);
void write_conll(std::ostream& out, const Corpus& corpus);
void write_conll(const std::filesystem::path& path, const Corpus& corpus);

std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(std::u32string_view text);

// ---- tags -------------------------------------------------------------

struct TagParts {
  char prefix = 'O';  // 'O', 'B', 'I', 'E' or 'S'
  std::string type;   // empty for 'O'
};

TagParts split_tag(std::string_view tag);
std::string join_tag(char prefix, std::string_view type);

// Index of the first tag that breaks `scheme`, if any.
std::optional<std::size_t> first_invalid_tag(std::span<const std::string> tags, TagScheme scheme);
void validate_tags(std::span<const std::string> tags, TagScheme scheme);
void validate_corpus(const Corpus& corpus);

std::vector<std::string> convert_tags(std::span<const std::string> tags, TagScheme from,
                                      TagScheme to);
Sentence convert_sentence(const Sentence& sentence, TagScheme to);
Corpus convert_corpus(const Corpus& corpus, TagScheme to);

// Entity types that appear in the corpus, sorted.
std::vector<std::string> entity_types(const Corpus& corpus);

// Closed tag inventory for a scheme: O followed by the prefixed tags of every type.
class TagSet {
 public:
  TagSet() = default;
  TagSet(std::vector<std::string> types, TagScheme scheme);

  int id(std::string_view tag) const;  // throws DataError for unknown tags
  const std::string& tag(int id) const { return tags_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tags_.size()); }
  TagScheme scheme() const { return scheme_; }
  const std::vector<std::string>& types() const { return types_; }
  const std::vector<std::string>& tags() const { return tags_; }

  // Whether `to` may directly follow `from` under the scheme.
  bool allowed(int from, int to) const;
  bool allowed_start(int tag) const;
  bool allowed_end(int tag) const;

 private:
  std::vector<std::string> types_;
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> index_;
  TagScheme scheme_ = TagScheme::BIOES;
};

// ---- vocabularies -------------------------------------------------------

// Lookup normalization for words. Characters always use the raw surface.
struct Normalization {
  bool lowercase = true;
  bool zero_digits = true;
};

std::string normalize_word(std::string_view surface, const Normalization& norm = {});

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocab();

  int add(const std::string& word);
  int lookup(std::string_view word) const;  // kUnk if absent
  bool contains(std::string_view word) const;
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

// Normalized word forms with frequency >= min_freq, ordered by descending
// frequency then lexicographically, after the PAD and UNK specials.
Vocab build_vocab(const Corpus& corpus, std::size_t min_freq, const Normalization& norm = {});

// One entry per distinct codepoint (UTF-8 encoded), same ordering rule.
Vocab build_char_vocab(const Corpus& corpus);

struct EmbeddingTable {
  Eigen::MatrixXf matrix;        // vocab.size() x dim
  std::vector<bool> pretrained;  // row came from the file
  int dim = 0;
  double coverage = 0.0;  // fraction of non-special vocab entries found
};

// Rows for vocab entries found in the GloVe-style text file are copied;
// the rest are drawn from uniform(-sqrt(3/dim), sqrt(3/dim)). Words in the
// file are normalized the same way as the vocab; the first occurrence wins.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocab& vocab, int dim,
                               Rng& rng, const Normalization& norm = {});

EmbeddingTable random_embeddings(const Vocab& vocab, int dim, Rng& rng);

// Normalized words present in an embedding file.
std::unordered_set<std::string> embedding_words(const std::filesystem::path& path,
                                                const Normalization& norm = {});

}  // namespace hcner
