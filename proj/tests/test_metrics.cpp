#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "aftermath/metrics.hpp"
#include "temp_dir.hpp"

using namespace aftermath;
using namespace aftermath::metrics;
using taxonomy::DamageCategory;
using taxonomy::kMajorDamage;
using taxonomy::kModerateDamage;
using taxonomy::kNoSlightDamage;
using taxonomy::kTotallyDestroyed;

namespace {

ConfusionMatrix two_class_toy() {
    // truth 1: predicted 1 x8, predicted 4 x2; truth 4: predicted 1 x1, predicted 4 x9
    ConfusionMatrix cm;
    for (int i = 0; i < 8; ++i) cm.add(kNoSlightDamage, kNoSlightDamage);
    for (int i = 0; i < 2; ++i) cm.add(kNoSlightDamage, kTotallyDestroyed);
    cm.add(kTotallyDestroyed, kNoSlightDamage);
    for (int i = 0; i < 9; ++i) cm.add(kTotallyDestroyed, kTotallyDestroyed);
    return cm;
}

}  // namespace

TEST_CASE("confusion matrix counts, margins, trace") {
    ConfusionMatrix cm = two_class_toy();
    CHECK(cm.total() == 20);
    CHECK(cm.trace() == 17);
    CHECK(cm.count(kNoSlightDamage, kTotallyDestroyed) == 2);
    CHECK(cm.tp(kNoSlightDamage) == 8);
    CHECK(cm.fp(kNoSlightDamage) == 1);
    CHECK(cm.fn(kNoSlightDamage) == 2);
    CHECK(cm.support(kNoSlightDamage) == 10);
    CHECK(cm.support(kModerateDamage) == 0);
    CHECK(cm.unscored() == 0);
}

TEST_CASE("two-class toy metrics") {
    ConfusionMatrix cm = two_class_toy();
    CHECK(precision(cm, kNoSlightDamage) == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
    CHECK(recall(cm, kNoSlightDamage) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(f1(cm, kNoSlightDamage) == doctest::Approx(16.0 / 19.0).epsilon(1e-12));
    CHECK(overall_accuracy(cm) == doctest::Approx(0.85).epsilon(1e-12));
}

TEST_CASE("empty denominators give zero, empty matrix throws on accuracy") {
    ConfusionMatrix cm;
    CHECK(precision(cm, kMajorDamage) == 0.0);
    CHECK(recall(cm, kMajorDamage) == 0.0);
    CHECK(f1(cm, kMajorDamage) == 0.0);
    CHECK_THROWS_AS(overall_accuracy(cm), EmptyMatrix);
    cm.add_unscored();
    CHECK_THROWS_AS(overall_accuracy(cm), EmptyMatrix);
    // summarize stays usable for failed batches: zeros, counts intact
    EvaluationSummary s = summarize(cm);
    CHECK(s.overall_accuracy == 0.0);
    CHECK(s.total == 0);
    CHECK(s.unscored == 1);
    CHECK(s.accuracy_caveat == std::string(kAccuracyCaveat));
}

TEST_CASE("merge is the same as accumulating in one pass") {
    std::mt19937 rng(77);
    std::vector<Outcome> outcomes;
    for (int i = 0; i < 300; ++i) {
        Outcome o{DamageCategory::from_level(1 + static_cast<int>(rng() % 4)), std::nullopt};
        if (rng() % 10 != 0) {
            o.predicted = DamageCategory::from_level(1 + static_cast<int>(rng() % 4));
        }
        outcomes.push_back(o);
    }
    ConfusionMatrix whole = accumulate(outcomes);
    ConfusionMatrix left = accumulate(std::span(outcomes).subspan(0, 100));
    ConfusionMatrix right = accumulate(std::span(outcomes).subspan(100));
    left.merge(right);
    for (auto t : DamageCategory::all()) {
        for (auto p : DamageCategory::all()) {
            CHECK(left.count(t, p) == whole.count(t, p));
        }
    }
    CHECK(left.unscored() == whole.unscored());
}

TEST_CASE("f1 is the harmonic mean of precision and recall") {
    std::mt19937 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        ConfusionMatrix cm;
        for (int i = 0; i < 60; ++i) {
            cm.add(DamageCategory::from_level(1 + static_cast<int>(rng() % 4)),
                   DamageCategory::from_level(1 + static_cast<int>(rng() % 4)));
        }
        for (auto c : DamageCategory::all()) {
            const double p = precision(cm, c);
            const double r = recall(cm, c);
            CHECK(f1(cm, c) == doctest::Approx(f1_from_pr(p, r)).epsilon(1e-12));
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
            CHECK(r >= 0.0);
            CHECK(r <= 1.0);
        }
    }
}

TEST_CASE("degenerate all-majority prediction: accuracy inflates, caveat present") {
    ConfusionMatrix cm;
    for (int i = 0; i < 75; ++i) cm.add(kNoSlightDamage, kNoSlightDamage);
    for (int i = 0; i < 25; ++i) cm.add(kTotallyDestroyed, kNoSlightDamage);
    CHECK(overall_accuracy(cm) == 0.75);
    CHECK(f1(cm, kTotallyDestroyed) == 0.0);
    EvaluationSummary s = summarize(cm);
    CHECK(s.accuracy_caveat == std::string(kAccuracyCaveat));
    CHECK_FALSE(s.accuracy_caveat.empty());
}

TEST_CASE("summary json round-trip") {
    ConfusionMatrix cm = two_class_toy();
    cm.add_unscored();
    BaselineTable table = BaselineTable::load(source_path("data/xbd_baseline.csv"));
    EvaluationSummary s = summarize(cm, &table);
    EvaluationSummary back = summary_from_json(summary_to_json(s));
    CHECK(back.overall_accuracy == s.overall_accuracy);
    CHECK(back.unscored == s.unscored);
    CHECK(back.total == s.total);
    CHECK(back.accuracy_caveat == s.accuracy_caveat);
    REQUIRE(back.per_class.size() == s.per_class.size());
    for (std::size_t i = 0; i < s.per_class.size(); ++i) {
        CHECK(back.per_class[i].category == s.per_class[i].category);
        CHECK(back.per_class[i].precision == s.per_class[i].precision);
        CHECK(back.per_class[i].recall == s.per_class[i].recall);
        CHECK(back.per_class[i].f1 == s.per_class[i].f1);
        CHECK(back.per_class[i].support == s.per_class[i].support);
    }
    REQUIRE(back.baseline_deltas.has_value());
    for (int i = 0; i < 4; ++i) {
        CHECK((*back.baseline_deltas)[i].d_f1 == (*s.baseline_deltas)[i].d_f1);
    }
}

TEST_CASE("baseline table parses the reference csv") {
    BaselineTable t = BaselineTable::load(source_path("data/xbd_baseline.csv"));
    CHECK(t.baseline[0].precision == doctest::Approx(0.8770).epsilon(1e-12));
    CHECK(t.baseline[0].recall == doctest::Approx(0.5330).epsilon(1e-12));
    CHECK(t.baseline[0].f1 == doctest::Approx(0.6631).epsilon(1e-12));
    CHECK(t.baseline[2].f1 == doctest::Approx(0.0094).epsilon(1e-12));
    CHECK(t.published[0].f1 == doctest::Approx(0.800).epsilon(1e-12));
    CHECK(t.published[3].precision == doctest::Approx(0.893).epsilon(1e-12));
    CHECK(t.published[3].recall == doctest::Approx(0.895).epsilon(1e-12));
    CHECK(t.published[3].f1 == doctest::Approx(0.894).epsilon(1e-12));
}

TEST_CASE("baseline table rejects gaps") {
    std::istringstream in(
        "no_slight_damage,0.1,0.2,0.3,0.4,0.5,0.6\n"
        "moderate_damage,0.1,0.2,0.3,0.4,0.5,0.6\n");
    CHECK_THROWS_AS(BaselineTable::parse(in), MissingClass);
}

TEST_CASE("compare_to_baseline subtracts the baseline columns") {
    ConfusionMatrix cm;
    for (int i = 0; i < 10; ++i) cm.add(kNoSlightDamage, kNoSlightDamage);
    for (auto c : {kModerateDamage, kMajorDamage, kTotallyDestroyed}) cm.add(c, c);
    BaselineTable t = BaselineTable::load(source_path("data/xbd_baseline.csv"));
    EvaluationSummary s = summarize(cm, &t);
    REQUIRE(s.baseline_deltas.has_value());
    // perfect classifier: delta f1 = 1 - baseline f1
    CHECK((*s.baseline_deltas)[0].d_f1 == doctest::Approx(1.0 - 0.6631).epsilon(1e-9));
    CHECK((*s.baseline_deltas)[2].d_f1 == doctest::Approx(1.0 - 0.0094).epsilon(1e-9));
}

TEST_CASE("metrics table renders both layouts") {
    ConfusionMatrix cm = two_class_toy();
    BaselineTable t = BaselineTable::load(source_path("data/xbd_baseline.csv"));
    EvaluationSummary with = summarize(cm, &t);
    std::string table = render_metrics_table(with, &t);
    CHECK(table.find("No/Slight Damage") != std::string::npos);
    CHECK(table.find("0.663") != std::string::npos);  // baseline f1 column
    CHECK(table.find("accuracy") != std::string::npos);
    EvaluationSummary without = summarize(cm);
    std::string plain = render_metrics_table(without, nullptr);
    CHECK(plain.find("Totally Destroyed") != std::string::npos);
    CHECK(plain.find("0.663") == std::string::npos);
}

TEST_CASE("predictions jsonl round-trip") {
    std::vector<PredictionRecord> records = {
        {"sceneA", "b1", kNoSlightDamage, kNoSlightDamage},
        {"sceneA", "b2", kTotallyDestroyed, kMajorDamage},
        {"sceneA", "b3", std::nullopt, kModerateDamage},  // no truth: excluded from metrics
        {"sceneB", "b1", kMajorDamage, std::nullopt},     // unscored
    };
    std::stringstream buf;
    write_predictions(buf, records);

    // one JSON object per line
    int lines = 0;
    for (std::string line; std::getline(buf, line);) {
        CHECK(line.front() == '{');
        ++lines;
    }
    CHECK(lines == 4);

    buf.clear();
    buf.seekg(0);
    auto back = read_predictions(buf);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(back[i].scene == records[i].scene);
        CHECK(back[i].building_id == records[i].building_id);
        CHECK(back[i].truth == records[i].truth);
        CHECK(back[i].predicted == records[i].predicted);
    }

    ConfusionMatrix cm = accumulate_records(back);
    CHECK(cm.total() == 2);    // b3 has no truth, b1/sceneB is unscored
    CHECK(cm.unscored() == 1);
    CHECK(cm.count(kTotallyDestroyed, kMajorDamage) == 1);
}

TEST_CASE("prediction wire words") {
    std::vector<PredictionRecord> records = {
        {"s", "b", std::nullopt, std::nullopt},
    };
    std::stringstream buf;
    write_predictions(buf, records);
    const std::string line = buf.str();
    CHECK(line.find("\"truth\":null") != std::string::npos);
    CHECK(line.find("\"predicted\":\"unscored\"") != std::string::npos);
    CHECK(line.find("\"scene\":\"s\"") != std::string::npos);
    CHECK(line.find("\"building_id\":\"b\"") != std::string::npos);
}
