#include "nertag/tagscheme.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include <fmt/core.h>

#include "nertag/errors.hpp"

namespace nertag {

EntityTypeSet::EntityTypeSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw ValidationError("entity type set is empty");
  std::unordered_set<std::string> seen;
  for (const auto& name : names_) {
    if (name.empty()) throw ValidationError("entity type name is empty");
    if (std::any_of(name.begin(), name.end(),
                    [](unsigned char c) { return std::isspace(c) != 0; })) {
      throw ValidationError(fmt::format("entity type name '{}' contains whitespace", name));
    }
    if (!seen.insert(name).second) {
      throw ValidationError(fmt::format("duplicate entity type '{}'", name));
    }
  }
}

EntityTypeSet EntityTypeSet::Defaults() {
  return EntityTypeSet({"PER", "LOC", "GRP", "CORP", "PROD", "CW"});
}

EntityTypeSet EntityTypeSet::FromCsv(std::string_view csv) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = csv.find(',', pos);
    names.emplace_back(csv.substr(pos, comma == std::string_view::npos ? csv.npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (names.size() == 1 && names[0].empty()) names.clear();
  return EntityTypeSet(std::move(names));
}

std::optional<std::size_t> EntityTypeSet::find(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

TagVocabulary::TagVocabulary(EntityTypeSet types) : types_(std::move(types)) {
  names_.reserve(1 + 2 * types_.size());
  names_.emplace_back("O");
  for (const auto& type : types_.names()) {
    names_.push_back("B-" + type);
    names_.push_back("I-" + type);
  }
}

const std::string& TagVocabulary::name(TagIndex tag) const {
  if (tag < 0 || tag >= size()) {
    throw ValidationError(fmt::format("tag index {} outside [0, {})", tag, size()));
  }
  return names_[static_cast<std::size_t>(tag)];
}

std::optional<TagIndex> TagVocabulary::find(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<TagIndex>(it - names_.begin());
}

TagIndex TagVocabulary::index_of(std::string_view name) const {
  if (auto tag = find(name)) return *tag;
  throw ValidationError(fmt::format("unknown tag '{}'", name));
}

TagVocabulary expand_bio(const EntityTypeSet& types) { return TagVocabulary(types); }

bool is_valid_transition(const TagVocabulary& voc, TagIndex from, TagIndex to) {
  const int k = voc.size();
  if (from < 0 || from > voc.start_index()) {
    throw ValidationError(fmt::format("transition source {} outside [0, {}]", from, k));
  }
  if (to < 0 || to > voc.stop_index() || to == voc.start_index()) {
    throw ValidationError(
        fmt::format("transition target {} is neither a real tag nor STOP", to));
  }
  if (!voc.is_inside(to)) return true;
  if (from == voc.start_index() || voc.is_outside(from)) return false;
  return voc.type_of(from) == voc.type_of(to);
}

TransitionMask::TransitionMask(int k)
    : k_(k), cells_(static_cast<std::size_t>((k + 2) * (k + 2)), 0) {}

TransitionMask::TransitionMask(const TagVocabulary& voc) : TransitionMask(voc.size()) {
  for (TagIndex from = 0; from <= voc.start_index(); ++from) {
    for (TagIndex to = 0; to <= voc.stop_index(); ++to) {
      if (to == voc.start_index()) continue;
      set(from, to, is_valid_transition(voc, from, to));
    }
  }
}

TransitionMask TransitionMask::AllowAll(int k) {
  TransitionMask mask(k);
  for (TagIndex from = 0; from <= k; ++from) {
    for (TagIndex to = 0; to < k; ++to) mask.set(from, to, true);
    mask.set(from, k + 1, true);
  }
  return mask;
}

std::vector<EntitySpan> extract_spans(const TagVocabulary& voc,
                                      std::span<const TagIndex> tags) {
  std::vector<EntitySpan> spans;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::size_t open_start = kNone;
  std::size_t open_type = 0;
  auto close = [&](std::size_t end) {
    if (open_start != kNone) spans.push_back({open_start, end, voc.types().names()[open_type]});
    open_start = kNone;
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const TagIndex tag = tags[i];
    if (voc.is_inside(tag) && open_start != kNone && voc.type_of(tag) == open_type) continue;
    close(i);
    if (voc.is_begin(tag)) {
      open_start = i;
      open_type = voc.type_of(tag);
    }
  }
  close(tags.size());
  return spans;
}

std::vector<TagIndex> spans_to_tags(const TagVocabulary& voc,
                                    std::span<const EntitySpan> spans,
                                    std::size_t length) {
  std::vector<TagIndex> tags(length, 0);
  for (const auto& span : spans) {
    const auto type = voc.types().find(span.type);
    if (!type) throw ValidationError(fmt::format("unknown entity type '{}'", span.type));
    if (span.start >= span.end || span.end > length) {
      throw ValidationError(fmt::format("span [{}, {}) invalid for length {}", span.start,
                                        span.end, length));
    }
    tags[span.start] = voc.begin_tag(*type);
    for (std::size_t i = span.start + 1; i < span.end; ++i) tags[i] = voc.inside_tag(*type);
  }
  return tags;
}

RepairMode parse_repair_mode(std::string_view text) {
  if (text == "strict") return RepairMode::kStrict;
  if (text == "convert") return RepairMode::kConvert;
  if (text == "ignore") return RepairMode::kIgnore;
  throw ValidationError(fmt::format("unknown repair mode '{}'", text));
}

std::string_view to_string(RepairMode mode) {
  switch (mode) {
    case RepairMode::kStrict: return "strict";
    case RepairMode::kConvert: return "convert";
    case RepairMode::kIgnore: return "ignore";
  }
  return "convert";
}

std::vector<TagIndex> repair_bio(const TagVocabulary& voc, std::span<const TagIndex> tags,
                                 RepairMode mode) {
  std::vector<TagIndex> out;
  out.reserve(tags.size());
  TagIndex previous = voc.start_index();
  for (std::size_t i = 0; i < tags.size(); ++i) {
    TagIndex tag = tags[i];
    if (tag < 0 || tag >= voc.size()) {
      throw ValidationError(fmt::format("tag index {} at position {} is not a real tag", tag, i));
    }
    if (!is_valid_transition(voc, previous, tag)) {
      switch (mode) {
        case RepairMode::kStrict:
          throw SchemeViolation(
              fmt::format("invalid transition {} -> {} at position {}",
                          previous == voc.start_index() ? std::string("START") : voc.name(previous),
                          voc.name(tag), i),
              i);
        case RepairMode::kConvert: tag = voc.begin_tag(voc.type_of(tag)); break;
        case RepairMode::kIgnore: tag = 0; break;
      }
    }
    out.push_back(tag);
    previous = tag;
  }
  return out;
}

std::size_t count_invalid_transitions(const TagVocabulary& voc, std::span<const TagIndex> tags) {
  std::size_t invalid = 0;
  TagIndex previous = voc.start_index();
  for (const TagIndex tag : tags) {
    if (!is_valid_transition(voc, previous, tag)) ++invalid;
    previous = tag;
  }
  return invalid;
}

}  // namespace nertag
