#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aftermath/errors.hpp"
#include "aftermath/taxonomy.hpp"

#include <json.hpp>

namespace aftermath::metrics {

struct EmptyMatrix : Error {
  using Error::Error;
};
struct MissingClass : Error {
  using Error::Error;
};

/// 4x4 truth-by-prediction counts over the damage categories, plus a separate
/// tally of buildings the model failed to score. Accumulation is associative,
/// so shards can be merged.
class ConfusionMatrix {
 public:
  void add(taxonomy::DamageCategory truth, taxonomy::DamageCategory predicted);
  void add_unscored() { ++unscored_; }
  ConfusionMatrix& merge(const ConfusionMatrix& other);

  std::int64_t count(taxonomy::DamageCategory truth, taxonomy::DamageCategory predicted) const;
  std::int64_t tp(taxonomy::DamageCategory c) const;
  std::int64_t fp(taxonomy::DamageCategory c) const;  // column sum minus diagonal
  std::int64_t fn(taxonomy::DamageCategory c) const;  // row sum minus diagonal
  std::int64_t support(taxonomy::DamageCategory c) const;
  std::int64_t total() const;
  std::int64_t trace() const;
  std::int64_t unscored() const { return unscored_; }

 private:
  std::array<std::array<std::int64_t, 4>, 4> counts_{};  // [truth][predicted]
  std::int64_t unscored_ = 0;
};

/// One (truth, prediction) pair; a missing prediction counts as unscored.
struct Outcome {
  taxonomy::DamageCategory truth;
  std::optional<taxonomy::DamageCategory> predicted;
};

ConfusionMatrix accumulate(std::span<const Outcome> pairs);

// Per-class metrics. Ratios with an empty denominator are 0; all are computed
// from integer counts with a single division, so they are exactly rounded.
double precision(const ConfusionMatrix& cm, taxonomy::DamageCategory c);
double recall(const ConfusionMatrix& cm, taxonomy::DamageCategory c);
double f1(const ConfusionMatrix& cm, taxonomy::DamageCategory c);

/// Harmonic mean of an already-computed precision/recall pair; 0 when p+r == 0.
double f1_from_pr(double p, double r);

double overall_accuracy(const ConfusionMatrix& cm);  // throws EmptyMatrix when total == 0

/// Caveat attached to every summary: accuracy is inflated under class
/// imbalance, so per-class metrics are the ones to trust.
extern const std::string_view kAccuracyCaveat;

struct ClassMetrics {
  taxonomy::DamageCategory category;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::int64_t support = 0;
};

struct BaselineRow {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Published per-class reference numbers: the baseline classifier columns and
/// the proposed-solution columns, both stored verbatim from the data file.
struct BaselineTable {
  std::array<BaselineRow, 4> baseline;   // indexed by level-1
  std::array<BaselineRow, 4> published;  // proposed-solution reference values

  static BaselineTable load(const std::filesystem::path& path);
  static BaselineTable parse(std::istream& in);  // throws MissingClass on gaps
};

struct MetricDelta {
  double d_precision = 0;
  double d_recall = 0;
  double d_f1 = 0;
};

struct EvaluationSummary {
  std::vector<ClassMetrics> per_class;  // ordered by level 1..4
  double overall_accuracy = 0;
  std::string accuracy_caveat;
  std::int64_t unscored = 0;
  std::int64_t total = 0;
  std::optional<std::array<MetricDelta, 4>> baseline_deltas;
};

/// Unlike overall_accuracy, tolerates a matrix with nothing scored (accuracy 0)
/// so failed batches still produce a report.
EvaluationSummary summarize(const ConfusionMatrix& cm, const BaselineTable* baseline = nullptr);

std::array<MetricDelta, 4> compare_to_baseline(const EvaluationSummary& summary,
                                               const BaselineTable& baseline);

nlohmann::json summary_to_json(const EvaluationSummary& s);
EvaluationSummary summary_from_json(const nlohmann::json& j);

/// Text table mirroring the published comparison layout, 3 fractional digits.
std::string render_metrics_table(const EvaluationSummary& s, const BaselineTable* baseline);

/// One line of the predictions file: a scored building with optional truth.
struct PredictionRecord {
  std::string scene;
  std::string building_id;
  std::optional<taxonomy::DamageCategory> truth;      // null in the file when absent/un-classified
  std::optional<taxonomy::DamageCategory> predicted;  // "unscored" in the file when absent
};

void write_predictions(std::ostream& out, std::span<const PredictionRecord> records);
std::vector<PredictionRecord> read_predictions(std::istream& in);

/// Rows without truth are excluded entirely; rows with truth but no prediction
/// count as unscored.
ConfusionMatrix accumulate_records(std::span<const PredictionRecord> records);

}  // namespace aftermath::metrics
