#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nertag {

// Index into a TagVocabulary. Real tags are [0, k); k and k + 1 are the
// virtual START and STOP states used by the CRF.
using TagIndex = int;

// Ordered, duplicate-free list of entity type names.
class EntityTypeSet {
 public:
  explicit EntityTypeSet(std::vector<std::string> names);

  // PER, LOC, GRP, CORP, PROD, CW.
  static EntityTypeSet Defaults();

  // Parses a comma-separated list such as "PER,LOC".
  static EntityTypeSet FromCsv(std::string_view csv);

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::optional<std::size_t> find(std::string_view name) const;

  bool operator==(const EntityTypeSet&) const = default;

 private:
  std::vector<std::string> names_;
};

// BIO label space: [O, B-T1, I-T1, B-T2, I-T2, ...] plus START/STOP.
class TagVocabulary {
 public:
  explicit TagVocabulary(EntityTypeSet types);

  const EntityTypeSet& types() const { return types_; }

  // Number of real tags, 1 + 2 * |types|.
  int size() const { return static_cast<int>(names_.size()); }
  TagIndex start_index() const { return size(); }
  TagIndex stop_index() const { return size() + 1; }

  const std::string& name(TagIndex tag) const;
  std::optional<TagIndex> find(std::string_view name) const;
  // Throws ValidationError naming the unknown tag.
  TagIndex index_of(std::string_view name) const;

  bool is_outside(TagIndex tag) const { return tag == 0; }
  bool is_begin(TagIndex tag) const { return tag > 0 && tag < size() && tag % 2 == 1; }
  bool is_inside(TagIndex tag) const { return tag > 0 && tag < size() && tag % 2 == 0; }
  // Entity type position of a B-/I- tag.
  std::size_t type_of(TagIndex tag) const { return static_cast<std::size_t>((tag - 1) / 2); }
  TagIndex begin_tag(std::size_t type) const { return static_cast<TagIndex>(2 * type + 1); }
  TagIndex inside_tag(std::size_t type) const { return static_cast<TagIndex>(2 * type + 2); }

  bool operator==(const TagVocabulary& other) const { return types_ == other.types_; }

 private:
  EntityTypeSet types_;
  std::vector<std::string> names_;
};

TagVocabulary expand_bio(const EntityTypeSet& types);

// False exactly when `to` is I-X and `from` is neither B-X nor I-X. `from`
// may be START, `to` may be STOP.
bool is_valid_transition(const TagVocabulary& voc, TagIndex from, TagIndex to);

// (k+2) x (k+2) row-major table of is_valid_transition, with every
// transition into START or out of STOP marked invalid.
class TransitionMask {
 public:
  explicit TransitionMask(const TagVocabulary& voc);
  // Every transition allowed, for `k` real tags.
  static TransitionMask AllowAll(int k);

  int num_tags() const { return k_; }
  bool allowed(TagIndex from, TagIndex to) const {
    return cells_[static_cast<std::size_t>(from * (k_ + 2) + to)] != 0;
  }
  void set(TagIndex from, TagIndex to, bool allowed) {
    cells_[static_cast<std::size_t>(from * (k_ + 2) + to)] = allowed ? 1 : 0;
  }

 private:
  explicit TransitionMask(int k);
  int k_;
  std::vector<unsigned char> cells_;
};

struct EntitySpan {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  std::string type;

  auto operator<=>(const EntitySpan&) const = default;
};

std::vector<EntitySpan> extract_spans(const TagVocabulary& voc,
                                      std::span<const TagIndex> tags);

// Inverse of extract_spans on valid sequences: renders `spans` as BIO tags
// over `length` tokens.
std::vector<TagIndex> spans_to_tags(const TagVocabulary& voc,
                                    std::span<const EntitySpan> spans,
                                    std::size_t length);

enum class RepairMode { kStrict, kConvert, kIgnore };

RepairMode parse_repair_mode(std::string_view text);
std::string_view to_string(RepairMode mode);

std::vector<TagIndex> repair_bio(const TagVocabulary& voc,
                                 std::span<const TagIndex> tags,
                                 RepairMode mode = RepairMode::kConvert);

// Number of adjacent pairs (including START -> first) that break the BIO rules.
std::size_t count_invalid_transitions(const TagVocabulary& voc,
                                      std::span<const TagIndex> tags);

}  // namespace nertag
