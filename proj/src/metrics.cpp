#include "nertag/metrics.hpp"

#include <algorithm>
#include <map>
#include <ostream>

#include <fmt/core.h>

#include "nertag/errors.hpp"

namespace nertag::metrics {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

bool overlaps(const EntitySpan& a, const EntitySpan& b) {
  return a.start < b.end && b.start < a.end;
}

struct SentenceMatch {
  std::vector<EntitySpan> matched;
  std::vector<EntitySpan> missed;    // gold only
  std::vector<EntitySpan> spurious;  // predicted only
};

// Pairs identical spans; each gold span absorbs at most one prediction.
SentenceMatch match_spans(std::vector<EntitySpan> gold, std::vector<EntitySpan> predicted) {
  SentenceMatch out;
  std::vector<bool> used(gold.size(), false);
  for (auto& p : predicted) {
    bool hit = false;
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (!used[g] && gold[g] == p) {
        used[g] = true;
        hit = true;
        break;
      }
    }
    if (hit) {
      out.matched.push_back(std::move(p));
    } else {
      out.spurious.push_back(std::move(p));
    }
  }
  for (std::size_t g = 0; g < gold.size(); ++g) {
    if (!used[g]) out.missed.push_back(std::move(gold[g]));
  }
  return out;
}

struct PreparedSentence {
  const Sentence* sentence;
  std::vector<EntitySpan> gold;
  std::vector<EntitySpan> predicted;
};

std::vector<PreparedSentence> prepare(const Corpus& gold,
                                      const std::vector<std::vector<TagIndex>>& predicted,
                                      const ScoreOptions& options, std::size_t& invalid) {
  if (predicted.size() != gold.size()) {
    throw ValidationError(fmt::format("{} predicted sequences for {} gold sentences",
                                      predicted.size(), gold.size()));
  }
  const TagVocabulary& voc = gold.tags();
  std::vector<PreparedSentence> out;
  out.reserve(gold.size());
  invalid = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const Sentence& sentence = gold[s];
    if (!sentence.gold_tags) {
      throw ValidationError(fmt::format("gold sentence '{}' has no tags", sentence.id));
    }
    if (predicted[s].size() != sentence.size()) {
      throw ValidationError(fmt::format("sentence '{}': {} gold tokens, {} predicted tags",
                                        sentence.id, sentence.size(), predicted[s].size()));
    }
    for (const TagIndex tag : predicted[s]) {
      if (tag < 0 || tag >= voc.size()) {
        throw ValidationError(fmt::format("sentence '{}': predicted tag index {} is not a real tag",
                                          sentence.id, tag));
      }
    }
    invalid += count_invalid_transitions(voc, predicted[s]);
    const auto repaired = repair_bio(voc, predicted[s], options.repair);
    out.push_back({&sentence, extract_spans(voc, *sentence.gold_tags), extract_spans(voc, repaired)});
  }
  return out;
}

std::vector<Confusion> to_confusion(const std::map<std::pair<std::string, std::string>, std::size_t>& cells) {
  std::vector<Confusion> out;
  for (const auto& [key, count] : cells) out.push_back({key.first, key.second, count});
  return out;
}

}  // namespace

double f1(double precision, double recall) {
  if (!(precision >= 0.0 && precision <= 1.0) || !(recall >= 0.0 && recall <= 1.0)) {
    throw ValidationError(fmt::format("precision {} / recall {} outside [0, 1]", precision, recall));
  }
  const double sum = precision + recall;
  return sum == 0.0 ? 0.0 : 2.0 * precision * recall / sum;
}

ClassScore ClassScore::FromCounts(std::string type, std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassScore s;
  s.entity_type = std::move(type);
  s.true_positives = tp;
  s.false_positives = fp;
  s.false_negatives = fn;
  s.precision = ratio(tp, tp + fp);
  s.recall = ratio(tp, tp + fn);
  s.f1 = metrics::f1(s.precision, s.recall);
  return s;
}

ClassScore ClassScore::FromRates(std::string type, double precision, double recall) {
  ClassScore s;
  s.entity_type = std::move(type);
  s.precision = precision;
  s.recall = recall;
  s.f1 = metrics::f1(precision, recall);
  return s;
}

std::size_t MetricsReport::total_true_positives() const {
  std::size_t total = 0;
  for (const auto& c : per_class) total += c.true_positives;
  return total;
}

std::size_t MetricsReport::total_false_positives() const {
  std::size_t total = 0;
  for (const auto& c : per_class) total += c.false_positives;
  return total;
}

std::size_t MetricsReport::total_false_negatives() const {
  std::size_t total = 0;
  for (const auto& c : per_class) total += c.false_negatives;
  return total;
}

MetricsReport macro_average(std::vector<ClassScore> per_class) {
  MetricsReport report;
  report.per_class = std::move(per_class);
  if (report.per_class.empty()) return report;
  for (const auto& c : report.per_class) {
    report.macro_precision += c.precision;
    report.macro_recall += c.recall;
    report.macro_f1 += c.f1;
  }
  const double n = static_cast<double>(report.per_class.size());
  report.macro_precision /= n;
  report.macro_recall /= n;
  report.macro_f1 /= n;
  return report;
}

MetricsReport score(const Corpus& gold, const std::vector<std::vector<TagIndex>>& predicted,
                    const ScoreOptions& options) {
  std::size_t invalid = 0;
  const auto sentences = prepare(gold, predicted, options, invalid);
  const auto& types = gold.tags().types().names();
  std::map<std::string, std::size_t> tp, fp, fn;
  std::map<std::pair<std::string, std::string>, std::size_t> confusion;
  for (const auto& s : sentences) {
    auto match = match_spans(s.gold, s.predicted);
    for (const auto& span : match.matched) ++tp[span.type];
    for (const auto& span : match.spurious) ++fp[span.type];
    for (const auto& span : match.missed) ++fn[span.type];
    for (const auto& g : match.missed) {
      for (const auto& p : match.spurious) {
        if (overlaps(g, p) && g.type != p.type) ++confusion[{g.type, p.type}];
      }
    }
  }
  std::vector<ClassScore> per_class;
  per_class.reserve(types.size());
  for (const auto& type : types) {
    per_class.push_back(ClassScore::FromCounts(type, tp[type], fp[type], fn[type]));
  }
  MetricsReport report = macro_average(std::move(per_class));
  report.confusion = to_confusion(confusion);
  report.invalid_transition_count = invalid;
  return report;
}

ErrorBreakdown error_breakdown(const Corpus& gold,
                               const std::vector<std::vector<TagIndex>>& predicted,
                               const ScoreOptions& options) {
  std::size_t invalid = 0;
  const auto sentences = prepare(gold, predicted, options, invalid);
  ErrorBreakdown out;
  std::map<std::pair<std::string, std::string>, std::size_t> confusion;
  for (const auto& s : sentences) {
    const std::string& id = s.sentence->id;
    auto match = match_spans(s.gold, s.predicted);
    out.true_positives += match.matched.size();
    for (const auto& g : match.missed) {
      for (const auto& p : match.spurious) {
        if (!overlaps(g, p)) continue;
        if (g.type == p.type) {
          out.boundary_errors.push_back({id, g, p});
        } else {
          ++confusion[{g.type, p.type}];
        }
      }
    }
    for (auto& g : match.missed) out.false_negatives.push_back({id, std::move(g)});
    for (auto& p : match.spurious) out.false_positives.push_back({id, std::move(p)});
  }
  out.confusion = to_confusion(confusion);
  return out;
}

void write_report_text(const MetricsReport& report, std::ostream& out) {
  out << fmt::format("{:<12} {:>8} {:>8} {:>8} {:>6} {:>6} {:>6}\n", "Class Label", "Prec", "Rec",
                     "F1", "TP", "FP", "FN");
  for (const auto& c : report.per_class) {
    out << fmt::format("{:<12} {:>8.4f} {:>8.4f} {:>8.4f} {:>6} {:>6} {:>6}\n", c.entity_type,
                       c.precision, c.recall, c.f1, c.true_positives, c.false_positives,
                       c.false_negatives);
  }
  out << fmt::format("{:<12} {:>8.4f} {:>8.4f} {:>8.4f} {:>6} {:>6} {:>6}\n", "Average",
                     report.macro_precision, report.macro_recall, report.macro_f1,
                     report.total_true_positives(), report.total_false_positives(),
                     report.total_false_negatives());
  if (report.invalid_transition_count > 0) {
    out << fmt::format("invalid BIO transitions repaired: {}\n", report.invalid_transition_count);
  }
}

void write_report_kv(const MetricsReport& report, std::ostream& out) {
  for (const auto& c : report.per_class) {
    out << fmt::format("{0}.precision={1}\n{0}.recall={2}\n{0}.f1={3}\n", c.entity_type,
                       c.precision, c.recall, c.f1);
    out << fmt::format("{0}.tp={1}\n{0}.fp={2}\n{0}.fn={3}\n", c.entity_type, c.true_positives,
                       c.false_positives, c.false_negatives);
  }
  out << fmt::format("macro.precision={}\nmacro.recall={}\nmacro.f1={}\n", report.macro_precision,
                     report.macro_recall, report.macro_f1);
  out << fmt::format("total.tp={}\ntotal.fp={}\ntotal.fn={}\n", report.total_true_positives(),
                     report.total_false_positives(), report.total_false_negatives());
  out << fmt::format("invalid_transitions={}\n", report.invalid_transition_count);
}

void write_breakdown_text(const ErrorBreakdown& breakdown, const MetricsReport& report,
                          std::ostream& out) {
  if (breakdown.empty()) {
    out << "no errors\n";
    return;
  }
  std::vector<const ClassScore*> classes;
  for (const auto& c : report.per_class) classes.push_back(&c);
  std::stable_sort(classes.begin(), classes.end(),
                   [](const ClassScore* a, const ClassScore* b) { return a->f1 < b->f1; });
  out << "classes (worst F1 first)\n";
  out << fmt::format("  {:<12} {:>8} {:>6} {:>6}\n", "class", "F1", "FN", "FP");
  for (const ClassScore* c : classes) {
    out << fmt::format("  {:<12} {:>8.4f} {:>6} {:>6}\n", c->entity_type, c->f1,
                       c->false_negatives, c->false_positives);
  }

  out << "type confusions (gold -> predicted)\n";
  if (breakdown.confusion.empty()) out << "  none\n";
  for (const auto& cell : breakdown.confusion) {
    out << fmt::format("  {} -> {}: {}\n", cell.gold_type, cell.predicted_type, cell.count);
  }

  out << fmt::format("boundary errors: {}\n", breakdown.boundary_errors.size());
  for (const auto& e : breakdown.boundary_errors) {
    out << fmt::format("  {} {}: gold [{}, {}) predicted [{}, {})\n", e.sentence_id, e.gold.type,
                       e.gold.start, e.gold.end, e.predicted.start, e.predicted.end);
  }
  out << fmt::format("totals: tp={} fp={} fn={}\n", breakdown.true_positives,
                     breakdown.false_positives.size(), breakdown.false_negatives.size());
}

}  // namespace nertag::metrics
