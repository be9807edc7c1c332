#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "nertag/conll_io.hpp"
#include "nertag/tagscheme.hpp"

namespace nertag::metrics {

// Harmonic mean of precision and recall; 0 when both are 0. Throws
// ValidationError for inputs outside [0, 1].
double f1(double precision, double recall);

struct ClassScore {
  std::string entity_type;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static ClassScore FromCounts(std::string type, std::size_t tp, std::size_t fp, std::size_t fn);
  // For reproducing published per-class rows where only the rates are known.
  static ClassScore FromRates(std::string type, double precision, double recall);
};

struct Confusion {
  std::string gold_type;
  std::string predicted_type;
  std::size_t count = 0;

  bool operator==(const Confusion&) const = default;
};

struct MetricsReport {
  std::vector<ClassScore> per_class;  // entity type order
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<Confusion> confusion;  // overlapping spans with different types
  std::size_t invalid_transition_count = 0;  // in predictions, before repair

  std::size_t total_true_positives() const;
  std::size_t total_false_positives() const;
  std::size_t total_false_negatives() const;
};

// Unweighted means of the per-class precision, recall and F1 columns.
MetricsReport macro_average(std::vector<ClassScore> per_class);

struct ScoreOptions {
  RepairMode repair = RepairMode::kConvert;
};

// Exact-match entity scoring. `predicted[i]` pairs with `gold[i]`.
MetricsReport score(const Corpus& gold, const std::vector<std::vector<TagIndex>>& predicted,
                    const ScoreOptions& options = {});

struct SpanRef {
  std::string sentence_id;
  EntitySpan span;

  bool operator==(const SpanRef&) const = default;
};

struct BoundaryError {
  std::string sentence_id;
  EntitySpan gold;
  EntitySpan predicted;

  bool operator==(const BoundaryError&) const = default;
};

struct ErrorBreakdown {
  std::vector<Confusion> confusion;          // sorted by gold type, then predicted type
  std::vector<BoundaryError> boundary_errors;  // right type, overlapping but different span
  std::vector<SpanRef> false_negatives;        // unmatched gold spans
  std::vector<SpanRef> false_positives;        // unmatched predicted spans
  std::size_t true_positives = 0;

  bool empty() const {
    return confusion.empty() && boundary_errors.empty() && false_negatives.empty() &&
           false_positives.empty();
  }
};

ErrorBreakdown error_breakdown(const Corpus& gold,
                               const std::vector<std::vector<TagIndex>>& predicted,
                               const ScoreOptions& options = {});

// Aligned table: one row per class plus the "Average" row.
void write_report_text(const MetricsReport& report, std::ostream& out);
// key=value lines, e.g. "LOC.precision=0.8368".
void write_report_kv(const MetricsReport& report, std::ostream& out);
// Confusions, boundary errors, then per-class FN/FP counts, worst F1 first.
void write_breakdown_text(const ErrorBreakdown& breakdown, const MetricsReport& report,
                          std::ostream& out);

}  // namespace nertag::metrics
