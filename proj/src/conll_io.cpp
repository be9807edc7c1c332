#include "nertag/conll_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/core.h>

#include "nertag/errors.hpp"

namespace nertag {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t begin = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > begin) fields.push_back(line.substr(begin, i - begin));
  }
  return fields;
}

bool is_blank(std::string_view line) {
  for (const char c : line) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

// "# id <sid> ..." -> sid.
std::optional<std::string> id_from_comment(std::string_view line) {
  const auto fields = split_fields(line);
  if (fields.size() >= 3 && fields[0] == "#" && fields[1] == "id") return std::string(fields[2]);
  return std::nullopt;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open '{}'", path));
  return in;
}

}  // namespace

void Corpus::add(Sentence sentence) {
  if (sentence.tokens.empty()) {
    throw ValidationError(fmt::format("sentence '{}' has no tokens", sentence.id));
  }
  if (sentence.gold_tags) {
    if (sentence.gold_tags->size() != sentence.tokens.size()) {
      throw ValidationError(fmt::format("sentence '{}' has {} tokens but {} tags", sentence.id,
                                        sentence.tokens.size(), sentence.gold_tags->size()));
    }
    for (const TagIndex tag : *sentence.gold_tags) {
      if (tag < 0 || tag >= tags_.size()) {
        throw ValidationError(
            fmt::format("sentence '{}' has tag index {} outside [0, {})", sentence.id, tag, tags_.size()));
      }
    }
  }
  if (!by_id_.emplace(sentence.id, sentences_.size()).second) {
    throw ValidationError(fmt::format("duplicate sentence id '{}'", sentence.id));
  }
  sentences_.push_back(std::move(sentence));
}

const Sentence* Corpus::find(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &sentences_[it->second];
}

bool Corpus::labeled() const {
  for (const auto& sentence : sentences_) {
    if (!sentence.gold_tags) return false;
  }
  return true;
}

Corpus parse_conll(std::istream& in, const TagVocabulary& tags, const ParseOptions& options) {
  Corpus corpus(tags);
  Sentence current;
  std::vector<TagIndex> current_tags;
  std::optional<std::string> pending_id;
  std::size_t ordinal = 0;

  auto flush = [&] {
    if (current.tokens.empty()) return;
    ++ordinal;
    current.id = pending_id ? *pending_id : std::to_string(ordinal);
    if (options.has_labels) current.gold_tags = std::move(current_tags);
    corpus.add(std::move(current));
    current = Sentence{};
    current_tags.clear();
    pending_id.reset();
  };

  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) {
      flush();
      pending_id.reset();
      continue;
    }
    if (line[0] == '#') {
      if (auto id = id_from_comment(line)) {
        // An id line inside a block starts a new sentence.
        flush();
        pending_id = std::move(id);
      }
      continue;
    }
    const auto fields = split_fields(line);
    const std::size_t needed = options.has_labels ? 2 : 1;
    if (fields.size() < needed || fields.size() <= options.token_column) {
      throw ParseError(fmt::format("line {}: expected at least {} fields, got {}", line_number,
                                   std::max(needed, options.token_column + 1), fields.size()));
    }
    current.tokens.emplace_back(fields[options.token_column]);
    if (options.has_labels) {
      const long column = options.tag_column < 0
                              ? static_cast<long>(fields.size()) + options.tag_column
                              : options.tag_column;
      if (column < 0 || column >= static_cast<long>(fields.size())) {
        throw ParseError(fmt::format("line {}: tag column {} out of range for {} fields",
                                     line_number, options.tag_column, fields.size()));
      }
      const std::string_view tag_name = fields[static_cast<std::size_t>(column)];
      const auto tag = tags.find(tag_name);
      if (!tag) throw ParseError(fmt::format("line {}: unknown tag '{}'", line_number, tag_name));
      current_tags.push_back(*tag);
    }
  }
  flush();
  return corpus;
}

Corpus read_conll_file(const std::string& path, const TagVocabulary& tags,
                       const ParseOptions& options) {
  auto in = open_input(path);
  try {
    return parse_conll(in, tags, options);
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path, e.what()));
  }
}

void write_conll(const Corpus& corpus, const std::vector<std::vector<TagIndex>>& predictions,
                 std::ostream& out) {
  if (predictions.size() != corpus.size()) {
    throw ValidationError(fmt::format("{} predicted sequences for {} sentences",
                                      predictions.size(), corpus.size()));
  }
  const TagVocabulary& voc = corpus.tags();
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const Sentence& sentence = corpus[s];
    const auto& tags = predictions[s];
    if (tags.size() != sentence.size()) {
      throw ValidationError(fmt::format("sentence '{}' has {} tokens but {} predicted tags",
                                        sentence.id, sentence.size(), tags.size()));
    }
    out << "# id " << sentence.id << '\n';
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      out << sentence.tokens[i] << " _ _ " << voc.name(tags[i]) << '\n';
    }
    out << '\n';
  }
}

void write_conll(const Corpus& corpus, std::ostream& out) {
  std::vector<std::vector<TagIndex>> tags;
  tags.reserve(corpus.size());
  for (const auto& sentence : corpus.sentences()) {
    if (!sentence.gold_tags) {
      throw ValidationError(fmt::format("sentence '{}' has no tags to write", sentence.id));
    }
    tags.push_back(*sentence.gold_tags);
  }
  write_conll(corpus, tags, out);
}

TokenVocabulary::TokenVocabulary(const std::vector<std::string>& tokens) {
  for (const auto& token : tokens) {
    if (index_.emplace(token, kReserved + tokens_.size()).second) tokens_.push_back(token);
  }
}

std::size_t TokenVocabulary::lookup(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool TokenVocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

TokenVocabulary build_token_vocabulary(const Corpus& corpus, std::size_t min_count) {
  if (min_count < 1) throw ValidationError("min_count must be at least 1");
  std::unordered_map<std::string, std::size_t> counts;
  std::vector<std::string> order;
  for (const auto& sentence : corpus.sentences()) {
    for (const auto& token : sentence.tokens) {
      if (counts[token]++ == 0) order.push_back(token);
    }
  }
  std::vector<std::string> kept;
  for (const auto& token : order) {
    if (counts[token] >= min_count) kept.push_back(token);
  }
  return TokenVocabulary(kept);
}

void EmbeddingSet::add(std::string id, Matrix values) {
  if (static_cast<std::size_t>(values.cols()) != dimension_) {
    throw ShapeError(fmt::format("embedding for '{}' has {} columns, expected {}", id,
                                 values.cols(), dimension_));
  }
  if (!values.allFinite()) throw ParseError(fmt::format("embedding for '{}' is not finite", id));
  matrices_.insert_or_assign(std::move(id), std::move(values));
}

const Matrix* EmbeddingSet::find(std::string_view id) const {
  const auto it = matrices_.find(id);
  return it == matrices_.end() ? nullptr : &it->second;
}

bool EmbeddingSet::operator==(const EmbeddingSet& other) const {
  if (dimension_ != other.dimension_ || matrices_.size() != other.matrices_.size()) return false;
  for (auto a = matrices_.begin(), b = other.matrices_.begin(); a != matrices_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.rows() != b->second.rows() ||
        a->second.cols() != b->second.cols() || a->second != b->second) {
      return false;
    }
  }
  return true;
}

EmbeddingSet load_embeddings(std::istream& in, const std::vector<const Corpus*>& corpora) {
  std::string line;
  std::size_t line_number = 0;
  std::optional<std::size_t> dimension;
  while (std::getline(in, line)) {
    ++line_number;
    if (is_blank(line)) continue;
    const auto fields = split_fields(line);
    std::size_t d = 0;
    if (fields.size() != 2 || fields[0] != "dim" ||
        std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), d).ec != std::errc{} ||
        d == 0) {
      throw ParseError(fmt::format("line {}: expected header 'dim <d>'", line_number));
    }
    dimension = d;
    break;
  }
  if (!dimension) throw ParseError("embedding file has no 'dim <d>' header");

  EmbeddingSet out(*dimension);
  std::optional<std::string> id;
  const Sentence* sentence = nullptr;
  std::vector<double> values;
  std::size_t rows = 0;

  auto resolve = [&](const std::string& sid) -> const Sentence* {
    const Sentence* found = nullptr;
    for (const Corpus* corpus : corpora) {
      if (const Sentence* s = corpus->find(sid)) {
        if (found != nullptr) throw ParseError(fmt::format("sentence id '{}' is ambiguous", sid));
        found = s;
      }
    }
    return found;
  };
  auto flush = [&] {
    if (!id) return;
    if (rows != sentence->size()) {
      throw ParseError(fmt::format("embedding block '{}' has {} rows, sentence has {} tokens", *id,
                                   rows, sentence->size()));
    }
    if (out.find(*id) != nullptr) throw ParseError(fmt::format("duplicate embedding block '{}'", *id));
    Matrix m = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(rows),
                                        static_cast<Eigen::Index>(*dimension));
    out.add(*id, std::move(m));
    id.reset();
    values.clear();
    rows = 0;
  };

  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    if (line[0] == '#') {
      auto sid = id_from_comment(line);
      if (!sid) throw ParseError(fmt::format("line {}: expected '# id <sid>'", line_number));
      flush();
      sentence = resolve(*sid);
      if (sentence == nullptr) {
        throw ParseError(fmt::format("line {}: unknown sentence id '{}'", line_number, *sid));
      }
      id = std::move(sid);
      continue;
    }
    if (!id) throw ParseError(fmt::format("line {}: values before any '# id' line", line_number));
    const auto fields = split_fields(line);
    if (fields.size() != *dimension) {
      throw ParseError(fmt::format("line {}: {} values, header declares dim {}", line_number,
                                   fields.size(), *dimension));
    }
    for (const auto field : fields) {
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw ParseError(fmt::format("line {}: cannot parse '{}' as a number", line_number, field));
      }
      if (!std::isfinite(value)) {
        throw ParseError(fmt::format("line {}: non-finite value '{}'", line_number, field));
      }
      values.push_back(value);
    }
    ++rows;
  }
  flush();
  return out;
}

EmbeddingSet load_embeddings(std::istream& in, const Corpus& corpus) {
  return load_embeddings(in, std::vector<const Corpus*>{&corpus});
}

EmbeddingSet load_embeddings_file(const std::string& path, const std::vector<const Corpus*>& corpora) {
  auto in = open_input(path);
  try {
    return load_embeddings(in, corpora);
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path, e.what()));
  }
}

void write_embeddings(const EmbeddingSet& embeddings, std::ostream& out) {
  out << "dim " << embeddings.dimension() << '\n';
  for (const auto& [id, matrix] : embeddings.matrices()) {
    out << "\n# id " << id << '\n';
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
      for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
        if (c > 0) out << ' ';
        out << fmt::format("{:.17g}", matrix(r, c));
      }
      out << '\n';
    }
  }
}

}  // namespace nertag
