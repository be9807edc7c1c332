#include <doctest.h>

#include <random>
#include <string>

#include "nertag/errors.hpp"
#include "nertag/tagscheme.hpp"

using namespace nertag;

namespace {

const TagVocabulary& default_voc() {
  static const TagVocabulary voc = expand_bio(EntityTypeSet::Defaults());
  return voc;
}

TagIndex tag(const char* name) { return default_voc().index_of(name); }

std::vector<TagIndex> tags(std::initializer_list<const char*> names) {
  std::vector<TagIndex> out;
  for (const char* n : names) out.push_back(tag(n));
  return out;
}

// Reference span reader working on tag strings: a span is a B-X followed by
// the longest run of I-X.
std::vector<EntitySpan> reference_spans(const TagVocabulary& voc, const std::vector<TagIndex>& seq) {
  std::vector<EntitySpan> out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const std::string& name = voc.name(seq[i]);
    if (name.rfind("B-", 0) != 0) continue;
    const std::string type = name.substr(2);
    std::size_t j = i + 1;
    while (j < seq.size() && voc.name(seq[j]) == "I-" + type) ++j;
    out.push_back({i, j, type});
  }
  return out;
}

// Reference repair on tag strings: an I-X is an orphan unless the previous
// output tag is B-X or I-X.
std::vector<std::string> reference_repair(const TagVocabulary& voc, const std::vector<TagIndex>& seq,
                                          const std::string& mode) {
  std::vector<std::string> out;
  for (const TagIndex t : seq) {
    std::string name = voc.name(t);
    if (name.rfind("I-", 0) == 0) {
      const std::string type = name.substr(2);
      const bool continues = !out.empty() && (out.back() == "B-" + type || out.back() == "I-" + type);
      if (!continues) name = mode == "convert" ? "B-" + type : "O";
    }
    out.push_back(name);
  }
  return out;
}

std::vector<std::vector<TagIndex>> all_sequences(int k, std::size_t n) {
  std::vector<std::vector<TagIndex>> out;
  std::vector<TagIndex> seq(n, 0);
  while (true) {
    out.push_back(seq);
    std::size_t pos = n;
    while (pos > 0 && seq[pos - 1] == k - 1) seq[--pos] = 0;
    if (pos == 0) break;
    ++seq[pos - 1];
  }
  return out;
}

}  // namespace

TEST_CASE("expand_bio builds the BIO label space") {
  const TagVocabulary single = expand_bio(EntityTypeSet({"PER"}));
  CHECK(single.size() == 3);
  CHECK(single.name(0) == "O");
  CHECK(single.name(1) == "B-PER");
  CHECK(single.name(2) == "I-PER");
  CHECK(single.start_index() == 3);
  CHECK(single.stop_index() == 4);

  CHECK(default_voc().size() == 13);
  CHECK(default_voc().name(1) == "B-PER");
  CHECK(default_voc().name(12) == "I-CW");

  CHECK_THROWS_AS(EntityTypeSet({}), ValidationError);
  CHECK_THROWS_AS(EntityTypeSet({"PER", "PER"}), ValidationError);
  CHECK_THROWS_AS(EntityTypeSet({"PER", ""}), ValidationError);
  CHECK_THROWS_AS(EntityTypeSet({"A B"}), ValidationError);
}

TEST_CASE("tag vocabulary is a bijection") {
  const auto& voc = default_voc();
  for (TagIndex i = 0; i < voc.size(); ++i) CHECK(voc.index_of(voc.name(i)) == i);
  CHECK_FALSE(voc.find("B-XYZ").has_value());
  CHECK_THROWS_AS(voc.index_of("b-PER"), ValidationError);
  CHECK_THROWS_AS(voc.name(13), ValidationError);
}

TEST_CASE("is_valid_transition") {
  const auto& voc = default_voc();
  CHECK_FALSE(is_valid_transition(voc, tag("B-PER"), tag("I-PROD")));
  CHECK(is_valid_transition(voc, tag("B-PER"), tag("I-PER")));
  CHECK(is_valid_transition(voc, tag("I-PER"), tag("I-PER")));
  CHECK_FALSE(is_valid_transition(voc, voc.start_index(), tag("I-LOC")));
  CHECK_FALSE(is_valid_transition(voc, tag("O"), tag("I-LOC")));
  CHECK(is_valid_transition(voc, voc.start_index(), tag("B-LOC")));
  CHECK(is_valid_transition(voc, voc.start_index(), tag("O")));
  for (TagIndex from = 0; from < voc.size(); ++from) {
    CHECK(is_valid_transition(voc, from, voc.stop_index()));
  }
  CHECK_THROWS_AS(is_valid_transition(voc, voc.stop_index(), 0), ValidationError);
  CHECK_THROWS_AS(is_valid_transition(voc, 0, voc.start_index()), ValidationError);
  CHECK_THROWS_AS(is_valid_transition(voc, -1, 0), ValidationError);
}

TEST_CASE("extract_spans examples") {
  const auto& voc = default_voc();
  CHECK(extract_spans(voc, tags({"B-LOC", "I-LOC", "I-LOC", "O"})) ==
        std::vector<EntitySpan>{{0, 3, "LOC"}});
  CHECK(extract_spans(voc, tags({"O", "O"})).empty());
  CHECK(extract_spans(voc, tags({"B-PER", "I-PROD"})) == std::vector<EntitySpan>{{0, 1, "PER"}});
  CHECK(extract_spans(voc, tags({"B-PER", "B-PER"})) ==
        std::vector<EntitySpan>{{0, 1, "PER"}, {1, 2, "PER"}});
  CHECK(extract_spans(voc, tags({"I-PER", "I-PER"})).empty());
}

TEST_CASE("extract_spans agrees with the reference reader on all sequences up to length 4") {
  const auto& voc = default_voc();
  for (std::size_t n = 0; n <= 4; ++n) {
    for (const auto& seq : all_sequences(voc.size(), n)) {
      REQUIRE(extract_spans(voc, seq) == reference_spans(voc, seq));
    }
  }
}

TEST_CASE("repair_bio examples") {
  const auto& voc = default_voc();
  CHECK(repair_bio(voc, tags({"I-LOC", "I-LOC"}), RepairMode::kConvert) == tags({"B-LOC", "I-LOC"}));
  for (auto mode : {RepairMode::kStrict, RepairMode::kConvert, RepairMode::kIgnore}) {
    CHECK(repair_bio(voc, tags({"B-PER", "I-PER"}), mode) == tags({"B-PER", "I-PER"}));
  }
  CHECK(repair_bio(voc, tags({"O", "I-CW", "I-CW"}), RepairMode::kIgnore) == tags({"O", "O", "O"}));

  try {
    repair_bio(voc, tags({"O", "B-PER", "I-LOC"}), RepairMode::kStrict);
    FAIL("expected a scheme violation");
  } catch (const SchemeViolation& e) {
    CHECK(e.position() == 2);
    CHECK(std::string(e.what()).find("position 2") != std::string::npos);
  }
  CHECK(parse_repair_mode("ignore") == RepairMode::kIgnore);
  CHECK_THROWS_AS(parse_repair_mode("fix"), ValidationError);
}

TEST_CASE("repair_bio matches the reference repair on all sequences up to length 3") {
  const auto& voc = default_voc();
  for (std::size_t n = 0; n <= 3; ++n) {
    for (const auto& seq : all_sequences(voc.size(), n)) {
      for (const char* mode : {"convert", "ignore"}) {
        const auto repaired = repair_bio(voc, seq, parse_repair_mode(mode));
        const auto expected = reference_repair(voc, seq, mode);
        REQUIRE(repaired.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) REQUIRE(voc.name(repaired[i]) == expected[i]);
      }
      if (count_invalid_transitions(voc, seq) == 0) {
        CHECK(repair_bio(voc, seq, RepairMode::kStrict) == seq);
      } else {
        CHECK_THROWS_AS(repair_bio(voc, seq, RepairMode::kStrict), SchemeViolation);
      }
    }
  }
}

TEST_CASE("random properties: repair validity, span bounds, span round trip") {
  const auto& voc = default_voc();
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<TagIndex> any_tag(0, voc.size() - 1);
  std::uniform_int_distribution<std::size_t> length(0, 50);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<TagIndex> seq(length(rng));
    for (auto& t : seq) t = any_tag(rng);

    for (auto mode : {RepairMode::kConvert, RepairMode::kIgnore}) {
      const auto repaired = repair_bio(voc, seq, mode);
      REQUIRE(count_invalid_transitions(voc, repaired) == 0);
      // Round trip on the (now valid) sequence.
      const auto spans = extract_spans(voc, repaired);
      REQUIRE(spans_to_tags(voc, spans, repaired.size()) == repaired);
    }

    const auto spans = extract_spans(voc, seq);
    for (std::size_t i = 0; i < spans.size(); ++i) {
      REQUIRE(spans[i].start < spans[i].end);
      REQUIRE(spans[i].end <= seq.size());
      if (i > 0) REQUIRE(spans[i - 1].end <= spans[i].start);
    }
  }
}

TEST_CASE("transition mask mirrors is_valid_transition") {
  const auto& voc = default_voc();
  const TransitionMask mask(voc);
  for (TagIndex from = 0; from <= voc.start_index(); ++from) {
    for (TagIndex to = 0; to < voc.size(); ++to) {
      CHECK(mask.allowed(from, to) == is_valid_transition(voc, from, to));
    }
    CHECK(mask.allowed(from, voc.stop_index()));
  }
  for (TagIndex to = 0; to <= voc.stop_index(); ++to) CHECK_FALSE(mask.allowed(voc.stop_index(), to));
}
