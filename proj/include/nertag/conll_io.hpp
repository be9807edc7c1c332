#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nertag/tagscheme.hpp"
#include "nertag/tensor.hpp"

namespace nertag {

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::optional<std::vector<TagIndex>> gold_tags;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const Sentence&) const = default;
};

class Corpus {
 public:
  explicit Corpus(TagVocabulary tags) : tags_(std::move(tags)) {}

  // Validates the sentence against the corpus invariants before appending.
  void add(Sentence sentence);

  const TagVocabulary& tags() const { return tags_; }
  const std::vector<Sentence>& sentences() const { return sentences_; }
  std::size_t size() const { return sentences_.size(); }
  bool empty() const { return sentences_.empty(); }
  const Sentence& operator[](std::size_t i) const { return sentences_[i]; }

  const Sentence* find(std::string_view id) const;
  bool labeled() const;

 private:
  TagVocabulary tags_;
  std::vector<Sentence> sentences_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct ParseOptions {
  std::size_t token_column = 0;
  // Negative counts from the end; -1 is the last field.
  int tag_column = -1;
  bool has_labels = true;
};

// Blank-line separated sentences, one whitespace-delimited token line per
// token. "# id <sid>" names the following sentence; other '#' lines are
// skipped. Unnamed sentences get their 1-based ordinal as id.
Corpus parse_conll(std::istream& in, const TagVocabulary& tags, const ParseOptions& options = {});
Corpus read_conll_file(const std::string& path, const TagVocabulary& tags,
                       const ParseOptions& options = {});

// Writes "token _ _ TAG" lines using each sentence's gold tags.
void write_conll(const Corpus& corpus, std::ostream& out);
// Same layout with externally supplied tags, one sequence per sentence.
void write_conll(const Corpus& corpus, const std::vector<std::vector<TagIndex>>& predictions,
                 std::ostream& out);

class TokenVocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kReserved = 2;

  TokenVocabulary() = default;
  // Rebuilds from an ordered token list (reserved entries excluded).
  explicit TokenVocabulary(const std::vector<std::string>& tokens);

  std::size_t lookup(std::string_view token) const;
  bool contains(std::string_view token) const;
  // Number of indices including the reserved ones.
  std::size_t size() const { return kReserved + tokens_.size(); }
  // Non-reserved tokens in index order.
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const TokenVocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

TokenVocabulary build_token_vocabulary(const Corpus& corpus, std::size_t min_count = 1);

class EmbeddingSet {
 public:
  explicit EmbeddingSet(std::size_t dimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  void add(std::string id, Matrix values);
  const Matrix* find(std::string_view id) const;
  const std::map<std::string, Matrix, std::less<>>& matrices() const { return matrices_; }

  // Exact element-wise equality.
  bool operator==(const EmbeddingSet& other) const;

 private:
  std::size_t dimension_;
  std::map<std::string, Matrix, std::less<>> matrices_;
};

// Header "dim <d>", then per sentence "# id <sid>" followed by one row of d
// floats per token, blank line between sentences. Ids resolve against the
// given corpora and must be unique across them.
EmbeddingSet load_embeddings(std::istream& in, const std::vector<const Corpus*>& corpora);
EmbeddingSet load_embeddings(std::istream& in, const Corpus& corpus);
EmbeddingSet load_embeddings_file(const std::string& path, const std::vector<const Corpus*>& corpora);

// Round-trip exact output (17 significant digits).
void write_embeddings(const EmbeddingSet& embeddings, std::ostream& out);

}  // namespace nertag
