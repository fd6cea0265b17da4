#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aftermath/cli.hpp"
#include "aftermath/ingest.hpp"
#include "aftermath/metrics.hpp"
#include "aftermath/report.hpp"
#include "aftermath/testkit.hpp"
#include "temp_dir.hpp"

using namespace aftermath;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json slurp_json(const std::filesystem::path& path) { return json::parse(slurp(path)); }

std::string prompts_dir() { return source_path("prompts").string(); }

// structured response answering any prompt that mentions the scene id
std::string scripted_scene_response() {
    return R"(Assessment follows.
```json
{
  "structures": [
    {"id": "building_1", "category": 2, "rationale": "roof holes", "confidence": "medium"},
    {"id": "building_2", "category": 4, "rationale": "collapsed", "confidence": "high"}
  ],
  "distribution": {"1": 0.0, "2": 0.5, "3": 0.0, "4": 0.5},
  "mmi": "MMI-XI",
  "caveats": "single view"
}
```)";
}

}  // namespace

TEST_CASE("unknown arguments exit with the config code") {
    CHECK(cli::run({"no-such-command"}) == cli::kExitConfig);
    CHECK(cli::run({"pseudo", "--bogus-flag"}) == cli::kExitConfig);
    CHECK(cli::run({}) == cli::kExitConfig);  // a subcommand is required
}

TEST_CASE("help exits zero") {
    CHECK(cli::run({"--help"}) == cli::kExitOk);
}

TEST_CASE("pseudo writes a frame directory and the config echo") {
    TempDir dir("cli-pseudo");
    img::write_png(dir / "still.png", img::solid_image(12, 10, 40, 80, 120));
    const int rc = cli::run({"pseudo", "--image", (dir / "still.png").string(),
                             "--phase", "post", "--scene", "sc1",
                             "--out", (dir / "out").string(), "--pseudo-count", "3"});
    CHECK(rc == cli::kExitOk);
    auto seq = ingest::read_frame_dir(dir.path / "out" / "sc1" / "post", ingest::Phase::post,
                                      "sc1", 1.0);
    CHECK(seq.frames.size() == 3);
    CHECK(seq.frames[0].image.width == 12);
    const std::string echo = slurp(dir.path / "out" / "config_resolved.toml");
    CHECK(echo.find("pseudo_count = 3") != std::string::npos);
}

TEST_CASE("pseudo rejects a bad phase with the dataset code") {
    TempDir dir("cli-phase");
    img::write_png(dir / "still.png", img::solid_image(4, 4, 0, 0, 0));
    CHECK(cli::run({"pseudo", "--image", (dir / "still.png").string(), "--phase", "during",
                    "--scene", "s", "--out", (dir / "out").string()}) == cli::kExitDataset);
}

TEST_CASE("bad config values exit with the config code") {
    TempDir dir("cli-cfg");
    img::write_png(dir / "still.png", img::solid_image(4, 4, 0, 0, 0));
    CHECK(cli::run({"pseudo", "--image", (dir / "still.png").string(), "--phase", "pre",
                    "--scene", "s", "--out", (dir / "out").string(), "--pad", "3.0"}) ==
          cli::kExitConfig);
}

TEST_CASE("sample on a missing video exits with the ingest code") {
    TempDir dir("cli-sample");
    CHECK(cli::run({"sample", "--input", (dir / "missing.mp4").string(), "--phase", "pre",
                    "--scene", "s", "--out", (dir / "out").string()}) == cli::kExitIngest);
}

TEST_CASE("enhance reuses the frame-dir layout") {
    TempDir dir("cli-enh");
    img::write_png(dir / "still.png", img::solid_image(9, 7, 10, 20, 30));
    REQUIRE(cli::run({"pseudo", "--image", (dir / "still.png").string(), "--phase", "pre",
                      "--scene", "sc", "--out", (dir / "frames").string(),
                      "--pseudo-count", "2"}) == cli::kExitOk);
    const int rc = cli::run({"enhance", "--frames", (dir / "frames").string(),
                             "--phase", "pre", "--scene", "sc",
                             "--enhance", "bicubic", "--scale", "2",
                             "--out", (dir / "enh").string()});
    CHECK(rc == cli::kExitOk);
    auto out = img::read_png(dir.path / "enh" / "cache" / "sc" / "pre" / "bicubic-x2" /
                             "frame_000000.png");
    CHECK(out.width == 18);
    CHECK(out.height == 14);
}

TEST_CASE("assess-scene produces a report from one pre/post image pair") {
    TempDir dir("cli-assess");
    img::write_png(dir / "pre.png", img::solid_image(16, 16, 200, 200, 190));
    img::write_png(dir / "post.png", img::solid_image(16, 16, 90, 70, 60));

    testkit::MockScript script;
    script.responses["sc-test"] = scripted_scene_response();
    testkit::MockVlm mock(script);
    mock.start();

    const int rc = cli::run({"assess-scene", "--pre", (dir / "pre.png").string(),
                             "--post", (dir / "post.png").string(), "--scene", "sc-test",
                             "--mmi", "--enhance", "identity",
                             "--vlm-url", mock.url(), "--model", "mock-model",
                             "--prompts", prompts_dir(),
                             "--out", (dir / "out").string()});
    CHECK(rc == cli::kExitOk);
    mock.stop();

    json rep = slurp_json(dir.path / "out" / "report.json");
    CHECK(rep["run_id"].is_string());
    CHECK(rep["config"]["enhance"]["backend"] == "identity");
    CHECK(rep["config"]["prompts"]["version_hash"].is_string());
    REQUIRE(rep["scenes"].size() == 1);
    const json& scene = rep["scenes"][0];
    CHECK(scene["scene_id"] == "sc-test");
    CHECK(scene["assessments"].size() == 2);
    CHECK(scene["mmi"] == "MMI-XI (Extreme)");
    CHECK(scene["provenance"]["enhancement_backend"] == "identity");
    CHECK(scene["provenance"]["session_ids"][0] == "sc-test#assess");
    CHECK(scene["distribution"]["totally_destroyed"] == 0.5);

    const std::string md = slurp(dir.path / "out" / "report.md");
    CHECK(md.find("## Scene sc-test") != std::string::npos);
    CHECK(md.find("MMI-XI (Extreme)") != std::string::npos);
    CHECK(std::filesystem::exists(dir.path / "out" / "config_resolved.toml"));
}

TEST_CASE("eval-xbd end to end on a fixture, deterministic across reruns") {
    TempDir dir("cli-eval");
    using taxonomy::XbdLabel;
    const std::vector<XbdLabel> labels = {XbdLabel::NoDamage, XbdLabel::MinorDamage,
                                          XbdLabel::Destroyed};
    auto files = testkit::gen_fixture_scene(dir.path, "evt-01", labels);
    ingest::ScenePair pair = ingest::load_xbd_scene(files, "evt-01", 1);

    testkit::MockVlm mock(testkit::make_truthful_script(pair.buildings));
    mock.start();
    setenv("SOURCE_DATE_EPOCH", "1718000000", 1);

    std::vector<std::string> args = {
        "eval-xbd", "--data", dir.str(), "--enhance", "identity",
        "--pseudo-count", "1", "--vlm-url", mock.url(), "--model", "mock-model",
        "--prompts", prompts_dir(),
        "--baseline", source_path("data/xbd_baseline.csv").string(),
        "--out", (dir / "out").string()};
    REQUIRE(cli::run(args) == cli::kExitOk);

    json m = slurp_json(dir.path / "out" / "metrics.json");
    CHECK(m["overall_accuracy"] == 1.0);
    CHECK(m["unscored"] == 0);
    CHECK(m["total"] == 3);

    // predictions carry one line per building, truth == predicted
    std::istringstream pred(slurp(dir.path / "out" / "predictions.jsonl"));
    auto records = metrics::read_predictions(pred);
    REQUIRE(records.size() == 3);
    for (const auto& r : records) {
        REQUIRE(r.truth.has_value());
        CHECK(r.predicted == r.truth);
    }

    CHECK(std::filesystem::exists(dir.path / "out" / "scene_evt-01.geojson"));
    const std::string report1 = slurp(dir.path / "out" / "report.json");
    json rep = json::parse(report1);
    CHECK(rep["evaluation"]["per_class"][0]["f1"] == 1.0);
    CHECK(rep["scenes"][0]["provenance"]["session_ids"].size() == 3);

    // a second run with the same pinned epoch reproduces the bytes
    REQUIRE(cli::run(args) == cli::kExitOk);
    CHECK(slurp(dir.path / "out" / "report.json") == report1);
    unsetenv("SOURCE_DATE_EPOCH");
    mock.stop();
}

TEST_CASE("eval-xbd without labels exits with the dataset code") {
    TempDir dir("cli-nolabel");
    std::filesystem::create_directories(dir / "images");
    CHECK(cli::run({"eval-xbd", "--data", dir.str(), "--prompts", prompts_dir(),
                    "--out", (dir / "out").string()}) == cli::kExitDataset);
}

TEST_CASE("eval-xbd missing prompts exits with the config code") {
    TempDir dir("cli-noprompts");
    testkit::gen_fixture_scene(dir.path, "s", {taxonomy::XbdLabel::NoDamage});
    CHECK(cli::run({"eval-xbd", "--data", dir.str(), "--prompts",
                    (dir / "nowhere").string(), "--out", (dir / "out").string()}) ==
          cli::kExitConfig);
}

TEST_CASE("eval-xbd with a dead SR service fails the batch, buildings unscored") {
    TempDir dir("cli-deadsr");
    testkit::gen_fixture_scene(dir.path, "s", {taxonomy::XbdLabel::NoDamage,
                                               taxonomy::XbdLabel::Destroyed});
    const int rc = cli::run({"eval-xbd", "--data", dir.str(), "--enhance", "service",
                             "--scale", "2", "--sr-url", "http://127.0.0.1:9",
                             "--timeout", "2", "--prompts", prompts_dir(),
                             "--out", (dir / "out").string()});
    CHECK(rc == cli::kExitAssessment);
    std::istringstream pred(slurp(dir.path / "out" / "predictions.jsonl"));
    auto records = metrics::read_predictions(pred);
    REQUIRE(records.size() == 2);
    for (const auto& r : records) CHECK_FALSE(r.predicted.has_value());
}

TEST_CASE("mmi ranks scene directories and compare tabulates them") {
    TempDir dir("cli-mmi");
    img::Image still = img::solid_image(10, 10, 120, 120, 120);
    for (const char* scene : {"quakeA", "quakeB"}) {
        for (auto phase : {ingest::Phase::pre, ingest::Phase::post}) {
            auto seq = ingest::make_pseudo_frames(still, 2, phase, scene);
            ingest::write_frame_dir(dir / "scenes", seq);
        }
    }
    testkit::MockScript script;
    script.responses["quakeA"] = "Visible damage suggests MMI-VIII overall.";
    script.responses["quakeB"] = "Widespread collapse, MMI-XI.";
    testkit::MockVlm mock(script);
    mock.start();

    const int rc = cli::run({"mmi", "--scenes", (dir / "scenes").string(),
                             "--repetitions", "2", "--enhance", "identity",
                             "--vlm-url", mock.url(), "--prompts", prompts_dir(),
                             "--out", (dir / "out").string()});
    CHECK(rc == cli::kExitOk);
    mock.stop();

    json doc = slurp_json(dir.path / "out" / "mmi.json");
    CHECK(doc["repetitions"] == 2);
    REQUIRE(doc["scenes"].size() == 2);
    CHECK(doc["scenes"][0]["scene_id"] == "quakeA");
    CHECK(doc["scenes"][0]["aggregate"] == "MMI-VIII");
    CHECK(doc["scenes"][0]["ranks"].size() == 2);
    CHECK(doc["scenes"][1]["aggregate"] == "MMI-XI");
    CHECK(doc["overall"] == "MMI-XI");
    const std::string md = slurp(dir.path / "out" / "mmi.md");
    CHECK(md.find("| quakeA |") != std::string::npos);
    CHECK(md.find("MMI-XI (Extreme)") != std::string::npos);

    // side-by-side table over two mmi.json files
    const int cmp = cli::run({"compare", "--a", (dir / "out" / "mmi.json").string(),
                              "--b", (dir / "out" / "mmi.json").string(),
                              "--out", (dir / "cmp").string()});
    CHECK(cmp == cli::kExitOk);
    const std::string cmp_md = slurp(dir.path / "cmp" / "compare.md");
    CHECK(cmp_md.find("MMI by scene") != std::string::npos);
    CHECK(cmp_md.find("| quakeB | MMI-XI | MMI-XI |") != std::string::npos);
}

TEST_CASE("report re-renders markdown from a report.json") {
    TempDir dir("cli-report");
    report::AssessmentReport rep;
    rep.run_id = "fixed";
    rep.created_at = "2024-06-01T00:00:00Z";
    protocol::SceneAssessment scene;
    scene.scene_id = "r1";
    scene.assessments.push_back(protocol::make_assessment(
        "building_1", taxonomy::kMajorDamage, "x", protocol::Confidence::medium));
    rep.scenes.push_back(scene);
    std::ofstream(dir / "report.json") << report::render_json(rep);

    CHECK(cli::run({"report", "--in", (dir / "report.json").string(),
                    "--out", (dir / "out").string()}) == cli::kExitOk);
    const std::string md = slurp(dir.path / "out" / "report.md");
    CHECK(md.find("## Scene r1") != std::string::npos);
    CHECK(md.find("building_1") != std::string::npos);
}

TEST_CASE("compare rejects inputs with nothing to compare") {
    TempDir dir("cli-cmp-bad");
    std::ofstream(dir / "a.json") << "{}";
    std::ofstream(dir / "b.json") << "{}";
    CHECK(cli::run({"compare", "--a", (dir / "a.json").string(), "--b",
                    (dir / "b.json").string(), "--out", (dir / "out").string()}) ==
          cli::kExitDataset);
}
