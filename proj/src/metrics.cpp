#include "aftermath/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace aftermath::metrics {

using taxonomy::DamageCategory;

const std::string_view kAccuracyCaveat =
    "Overall accuracy is misleading under class imbalance: a classifier that assigns the "
    "majority class to every building still scores the majority fraction. Judge performance "
    "by the per-class precision/recall/F1 instead.";

void ConfusionMatrix::add(DamageCategory truth, DamageCategory predicted) {
  ++counts_[truth.level() - 1][predicted.level() - 1];
}

ConfusionMatrix& ConfusionMatrix::merge(const ConfusionMatrix& other) {
  for (int t = 0; t < 4; ++t) {
    for (int p = 0; p < 4; ++p) {
      counts_[t][p] += other.counts_[t][p];
    }
  }
  unscored_ += other.unscored_;
  return *this;
}

std::int64_t ConfusionMatrix::count(DamageCategory truth, DamageCategory predicted) const {
  return counts_[truth.level() - 1][predicted.level() - 1];
}

std::int64_t ConfusionMatrix::tp(DamageCategory c) const {
  return counts_[c.level() - 1][c.level() - 1];
}

std::int64_t ConfusionMatrix::fp(DamageCategory c) const {
  std::int64_t sum = 0;
  for (int t = 0; t < 4; ++t) {
    if (t != c.level() - 1) sum += counts_[t][c.level() - 1];
  }
  return sum;
}

std::int64_t ConfusionMatrix::fn(DamageCategory c) const {
  std::int64_t sum = 0;
  for (int p = 0; p < 4; ++p) {
    if (p != c.level() - 1) sum += counts_[c.level() - 1][p];
  }
  return sum;
}

std::int64_t ConfusionMatrix::support(DamageCategory c) const {
  std::int64_t sum = 0;
  for (int p = 0; p < 4; ++p) sum += counts_[c.level() - 1][p];
  return sum;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t sum = 0;
  for (int t = 0; t < 4; ++t) {
    for (int p = 0; p < 4; ++p) sum += counts_[t][p];
  }
  return sum;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t sum = 0;
  for (int i = 0; i < 4; ++i) sum += counts_[i][i];
  return sum;
}

ConfusionMatrix accumulate(std::span<const Outcome> pairs) {
  ConfusionMatrix cm;
  for (const Outcome& o : pairs) {
    if (o.predicted) {
      cm.add(o.truth, *o.predicted);
    } else {
      cm.add_unscored();
    }
  }
  return cm;
}

namespace {
double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

double precision(const ConfusionMatrix& cm, DamageCategory c) {
  return ratio(cm.tp(c), cm.tp(c) + cm.fp(c));
}

double recall(const ConfusionMatrix& cm, DamageCategory c) {
  return ratio(cm.tp(c), cm.tp(c) + cm.fn(c));
}

double f1(const ConfusionMatrix& cm, DamageCategory c) {
  // 2pr/(p+r) rewritten over the counts so the result is a single exact
  // integer division: 2TP / (2TP + FP + FN).
  return ratio(2 * cm.tp(c), 2 * cm.tp(c) + cm.fp(c) + cm.fn(c));
}

double f1_from_pr(double p, double r) {
  if (p + r <= 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

double overall_accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw EmptyMatrix("overall_accuracy over an empty matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
}

BaselineTable BaselineTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open baseline table " + path.string());
  return parse(in);
}

BaselineTable BaselineTable::parse(std::istream& in) {
  BaselineTable table;
  std::array<bool, 4> seen{};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 7) {
      throw Error("baseline table row needs 7 fields: " + line);
    }
    auto cat = taxonomy::DamageCategory::from_canonical(fields[0]);
    if (!cat) throw Error("unknown class in baseline table: " + fields[0]);
    const int i = cat->level() - 1;
    table.baseline[i] = {std::stod(fields[1]), std::stod(fields[2]), std::stod(fields[3])};
    table.published[i] = {std::stod(fields[4]), std::stod(fields[5]), std::stod(fields[6])};
    seen[i] = true;
  }
  for (int i = 0; i < 4; ++i) {
    if (!seen[i]) {
      throw MissingClass("baseline table missing class " +
                         std::string(DamageCategory::from_level(i + 1).canonical()));
    }
  }
  return table;
}

std::array<MetricDelta, 4> compare_to_baseline(const EvaluationSummary& summary,
                                               const BaselineTable& baseline) {
  if (summary.per_class.size() != 4) {
    throw MissingClass("summary does not cover all four classes");
  }
  std::array<MetricDelta, 4> deltas;
  for (int i = 0; i < 4; ++i) {
    const ClassMetrics& m = summary.per_class[i];
    const BaselineRow& b = baseline.baseline[i];
    deltas[i] = {m.precision - b.precision, m.recall - b.recall, m.f1 - b.f1};
  }
  return deltas;
}

EvaluationSummary summarize(const ConfusionMatrix& cm, const BaselineTable* baseline) {
  EvaluationSummary s;
  for (DamageCategory c : DamageCategory::all()) {
    s.per_class.push_back({c, precision(cm, c), recall(cm, c), f1(cm, c), cm.support(c)});
  }
  // an all-unscored batch still summarizes (accuracy 0) so reports get written
  s.overall_accuracy = cm.total() == 0 ? 0.0 : overall_accuracy(cm);
  s.accuracy_caveat = std::string(kAccuracyCaveat);
  s.unscored = cm.unscored();
  s.total = cm.total();
  if (baseline) {
    s.baseline_deltas = compare_to_baseline(s, *baseline);
  }
  return s;
}

nlohmann::json summary_to_json(const EvaluationSummary& s) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const ClassMetrics& m : s.per_class) {
    per_class.push_back({{"class", m.category.canonical()},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"support", m.support}});
  }
  nlohmann::json j{{"per_class", per_class},
                   {"overall_accuracy", s.overall_accuracy},
                   {"accuracy_caveat", s.accuracy_caveat},
                   {"unscored", s.unscored},
                   {"total", s.total}};
  if (s.baseline_deltas) {
    nlohmann::json deltas = nlohmann::json::object();
    for (int i = 0; i < 4; ++i) {
      const MetricDelta& d = (*s.baseline_deltas)[i];
      deltas[std::string(DamageCategory::from_level(i + 1).canonical())] = {
          {"d_precision", d.d_precision}, {"d_recall", d.d_recall}, {"d_f1", d.d_f1}};
    }
    j["baseline_deltas"] = deltas;
  }
  return j;
}

EvaluationSummary summary_from_json(const nlohmann::json& j) {
  EvaluationSummary s;
  for (const auto& m : j.at("per_class")) {
    auto cat = taxonomy::DamageCategory::from_canonical(m.at("class").get<std::string>());
    if (!cat) throw Error("unknown class in summary json");
    s.per_class.push_back({*cat, m.at("precision").get<double>(), m.at("recall").get<double>(),
                           m.at("f1").get<double>(), m.at("support").get<std::int64_t>()});
  }
  s.overall_accuracy = j.at("overall_accuracy").get<double>();
  s.accuracy_caveat = j.value("accuracy_caveat", std::string());
  s.unscored = j.value("unscored", std::int64_t{0});
  s.total = j.value("total", std::int64_t{0});
  if (j.contains("baseline_deltas")) {
    std::array<MetricDelta, 4> deltas{};
    for (int i = 0; i < 4; ++i) {
      const auto& d =
          j["baseline_deltas"].at(std::string(DamageCategory::from_level(i + 1).canonical()));
      deltas[i] = {d.at("d_precision").get<double>(), d.at("d_recall").get<double>(),
                   d.at("d_f1").get<double>()};
    }
    s.baseline_deltas = deltas;
  }
  return s;
}

namespace {
std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}
}  // namespace

std::string render_metrics_table(const EvaluationSummary& s, const BaselineTable* baseline) {
  std::ostringstream out;
  if (baseline) {
    out << "Damage Type        | Baseline P  R  F1        | This Run P  R  F1\n";
    out << "-------------------+--------------------------+--------------------------\n";
    for (int i = 0; i < 4; ++i) {
      const ClassMetrics& m = s.per_class[i];
      const BaselineRow& b = baseline->baseline[i];
      char line[160];
      std::snprintf(line, sizeof(line), "%-18s | %6.4f %6.4f %6.4f   | %.3f %.3f %.3f\n",
                    std::string(m.category.display_name()).c_str(), b.precision, b.recall, b.f1,
                    m.precision, m.recall, m.f1);
      out << line;
    }
  } else {
    out << "Damage Type        | Precision | Recall | F1    | Support\n";
    out << "-------------------+-----------+--------+-------+--------\n";
    for (const ClassMetrics& m : s.per_class) {
      char line[160];
      std::snprintf(line, sizeof(line), "%-18s | %9s | %6s | %5s | %lld\n",
                    std::string(m.category.display_name()).c_str(), fixed3(m.precision).c_str(),
                    fixed3(m.recall).c_str(), fixed3(m.f1).c_str(),
                    static_cast<long long>(m.support));
      out << line;
    }
  }
  out << "Overall Accuracy: " << fixed3(s.overall_accuracy) << " (scored " << s.total
      << ", unscored " << s.unscored << ")\n";
  out << "Note: " << s.accuracy_caveat << "\n";
  return out.str();
}

void write_predictions(std::ostream& out, std::span<const PredictionRecord> records) {
  for (const PredictionRecord& r : records) {
    nlohmann::json j{{"scene", r.scene}, {"building_id", r.building_id}};
    j["truth"] = r.truth ? nlohmann::json(std::string(r.truth->canonical())) : nlohmann::json();
    j["predicted"] = r.predicted ? std::string(r.predicted->canonical()) : "unscored";
    out << j.dump() << "\n";
  }
}

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  std::vector<PredictionRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    PredictionRecord r;
    r.scene = j.at("scene").get<std::string>();
    r.building_id = j.at("building_id").get<std::string>();
    if (!j.at("truth").is_null()) {
      auto cat = taxonomy::DamageCategory::from_canonical(j["truth"].get<std::string>());
      if (!cat) throw Error("bad truth value in predictions file: " + line);
      r.truth = *cat;
    }
    const std::string pred = j.at("predicted").get<std::string>();
    if (pred != "unscored") {
      auto cat = taxonomy::DamageCategory::from_canonical(pred);
      if (!cat) throw Error("bad predicted value in predictions file: " + line);
      r.predicted = *cat;
    }
    records.push_back(std::move(r));
  }
  return records;
}

ConfusionMatrix accumulate_records(std::span<const PredictionRecord> records) {
  ConfusionMatrix cm;
  for (const PredictionRecord& r : records) {
    if (!r.truth) continue;  // un-classified or unlabeled: excluded, not unscored
    if (r.predicted) {
      cm.add(*r.truth, *r.predicted);
    } else {
      cm.add_unscored();
    }
  }
  return cm;
}

}  // namespace aftermath::metrics
