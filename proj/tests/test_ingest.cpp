#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "aftermath/ingest.hpp"
#include "aftermath/testkit.hpp"
#include "temp_dir.hpp"

using namespace aftermath;
using namespace aftermath::ingest;

namespace {

img::Image tiny(int w, int h, std::uint8_t v) { return img::solid_image(w, h, v, v, v); }

std::vector<img::Image> tiny_frames(int n) {
    std::vector<img::Image> frames;
    frames.reserve(n);
    for (int i = 0; i < n; ++i) frames.push_back(tiny(4, 3, static_cast<std::uint8_t>(i % 256)));
    return frames;
}

}  // namespace

TEST_CASE("phase names round-trip") {
    CHECK(phase_name(Phase::pre) == "pre");
    CHECK(phase_name(Phase::post) == "post");
    CHECK(parse_phase("pre") == Phase::pre);
    CHECK(parse_phase("post") == Phase::post);
    CHECK_THROWS_AS(parse_phase("during"), Error);
}

TEST_CASE("sample_frames keeps indices 0, s, 2s, ...") {
    MemoryFrameStream stream(tiny_frames(25), 25.0);
    FrameSequence seq = sample_frames(stream, 10, Phase::pre, "sc");
    REQUIRE(seq.frames.size() == 3);
    CHECK(seq.frames[0].source_index == 0);
    CHECK(seq.frames[1].source_index == 10);
    CHECK(seq.frames[2].source_index == 20);
    CHECK(seq.frames[0].index == 0);
    CHECK(seq.frames[2].index == 2);
    CHECK(seq.frames[1].timestamp_s == doctest::Approx(0.4));
    CHECK(seq.effective_fps() == doctest::Approx(2.5));
    seq.validate();
}

TEST_CASE("sampled count is ceil(N / stride)") {
    std::mt19937 rng(20240818);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 400);
        const int stride = 1 + static_cast<int>(rng() % 60);
        MemoryFrameStream stream(tiny_frames(n), 30.0);
        FrameSequence seq = sample_frames(stream, stride, Phase::post, "sc");
        CHECK(static_cast<int>(seq.frames.size()) == (n + stride - 1) / stride);
    }
}

TEST_CASE("sampling an empty stream throws") {
    MemoryFrameStream stream({}, 30.0);
    CHECK_THROWS_AS(sample_frames(stream, 10, Phase::pre, "sc"), EmptyStream);
}

TEST_CASE("sample_frames rejects stride < 1") {
    MemoryFrameStream stream(tiny_frames(3), 30.0);
    CHECK_THROWS_AS(sample_frames(stream, 0, Phase::pre, "sc"), Error);
}

TEST_CASE("pseudo frames are byte-identical copies") {
    img::Image im = tiny(6, 5, 77);
    FrameSequence seq = make_pseudo_frames(im, 5, Phase::post, "sc");
    REQUIRE(seq.frames.size() == 5);
    CHECK(seq.stride == 1);
    CHECK(seq.source_fps == 1.0);
    for (int i = 0; i < 5; ++i) {
        CHECK(seq.frames[i].image == im);
        CHECK(seq.frames[i].index == i);
        CHECK(seq.frames[i].source_index == i);
    }
    seq.validate();
    CHECK_THROWS_AS(make_pseudo_frames(im, 0, Phase::post, "sc"), Error);
}

TEST_CASE("validate rejects gaps and mixed sizes") {
    FrameSequence seq = make_pseudo_frames(tiny(4, 4, 1), 3, Phase::pre, "sc");
    seq.frames[1].index = 5;
    CHECK_THROWS_AS(seq.validate(), Error);
    FrameSequence seq2 = make_pseudo_frames(tiny(4, 4, 1), 3, Phase::pre, "sc");
    seq2.frames[2].image = tiny(5, 4, 1);
    CHECK_THROWS_AS(seq2.validate(), Error);
}

TEST_CASE("wkt polygon round-trip") {
    std::vector<std::pair<double, double>> poly = {{10, 10}, {20, 10}, {20, 20}, {10, 20}};
    std::string wkt = format_wkt_polygon(poly);
    CHECK(wkt.rfind("POLYGON", 0) == 0);
    CHECK(parse_wkt_polygon(wkt) == poly);
    // closing vertex in the input is dropped
    CHECK(parse_wkt_polygon("POLYGON ((1 2, 3 2, 3 4, 1 2))") ==
          std::vector<std::pair<double, double>>{{1, 2}, {3, 2}, {3, 4}});
    CHECK_THROWS_AS(parse_wkt_polygon("POLYGON (())"), Error);
    CHECK_THROWS_AS(parse_wkt_polygon("LINESTRING (0 0, 1 1)"), Error);
}

TEST_CASE("crop: zero pad keeps the inclusive pixel box") {
    Frame frame{0, 0, 0.0, tiny(40, 40, 9)};
    BuildingRecord b{"b1", {{10, 10}, {20, 10}, {20, 20}, {10, 20}}, std::nullopt, false};
    Frame crop = crop_building(frame, b, 0.0);
    CHECK(crop.width() == 11);
    CHECK(crop.height() == 11);
}

TEST_CASE("crop: half pad grows each side by half the span") {
    Frame frame{0, 0, 0.0, tiny(60, 60, 9)};
    BuildingRecord b{"b1", {{10, 10}, {20, 10}, {20, 20}, {10, 20}}, std::nullopt, false};
    Frame crop = crop_building(frame, b, 0.5);
    CHECK(crop.width() == 21);
    CHECK(crop.height() == 21);
}

TEST_CASE("crop clamps at the frame border") {
    Frame frame{0, 0, 0.0, tiny(24, 24, 9)};
    BuildingRecord b{"b1", {{0, 0}, {10, 0}, {10, 10}, {0, 10}}, std::nullopt, false};
    Frame crop = crop_building(frame, b, 0.5);
    // left/top cannot expand past 0
    CHECK(crop.width() == 16);
    CHECK(crop.height() == 16);
}

TEST_CASE("crop copies the right pixels") {
    img::Image base = tiny(30, 30, 0);
    for (int y = 10; y <= 20; ++y) {
        for (int x = 10; x <= 20; ++x) base.pixel(x, y)[0] = 200;
    }
    Frame frame{3, 30, 1.2, base};
    BuildingRecord b{"b1", {{10, 10}, {20, 10}, {20, 20}, {10, 20}}, std::nullopt, false};
    Frame crop = crop_building(frame, b, 0.0);
    CHECK(crop.index == frame.index);
    CHECK(crop.source_index == frame.source_index);
    for (int y = 0; y < crop.height(); ++y) {
        for (int x = 0; x < crop.width(); ++x) {
            REQUIRE(crop.image.pixel(x, y)[0] == 200);
        }
    }
}

TEST_CASE("degenerate polygons are rejected") {
    Frame frame{0, 0, 0.0, tiny(20, 20, 9)};
    BuildingRecord line{"b1", {{1, 1}, {5, 1}}, std::nullopt, false};
    CHECK_THROWS_AS(crop_building(frame, line, 0.0), DegeneratePolygon);
}

TEST_CASE("scale_building multiplies coordinates") {
    BuildingRecord b{"b1", {{1.5, 2}, {4, 2}, {4, 6}}, taxonomy::XbdLabel::NoDamage, false};
    BuildingRecord s = scale_building(b, 4);
    CHECK(s.building_id == "b1");
    CHECK(s.truth_label == b.truth_label);
    CHECK(s.polygon == std::vector<std::pair<double, double>>{{6, 8}, {16, 8}, {16, 24}});
}

TEST_CASE("frame dir round-trip") {
    TempDir dir("framedir");
    FrameSequence seq = make_pseudo_frames(tiny(8, 6, 123), 3, Phase::post, "scn");
    seq.frames[1].image.pixel(2, 2)[1] = 9;  // make frames distinguishable
    write_frame_dir(dir.path, seq);
    CHECK(std::filesystem::exists(dir.path / "scn" / "post" / "frame_000000.png"));
    CHECK(frame_file_name(17) == std::filesystem::path("frame_000017.png"));

    FrameSequence back = read_frame_dir(dir.path / "scn" / "post", Phase::post, "scn", 1.0);
    REQUIRE(back.frames.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(back.frames[i].image == seq.frames[i].image);
        CHECK(back.frames[i].index == i);
    }
    CHECK_THROWS_AS(read_frame_dir(dir.path / "missing", Phase::pre, "x", 1.0), Error);
}

TEST_CASE("png dir stream reads in filename order") {
    TempDir dir("pngstream");
    FrameSequence seq = make_pseudo_frames(tiny(5, 5, 10), 4, Phase::pre, "s");
    for (int i = 0; i < 4; ++i) {
        seq.frames[i].image.pixel(0, 0)[0] = static_cast<std::uint8_t>(i);
    }
    write_frame_dir(dir.path, seq);
    PngDirStream stream(dir.path / "s" / "pre", 2.0);
    CHECK(stream.fps() == 2.0);
    for (int i = 0; i < 4; ++i) {
        auto im = stream.next();
        REQUIRE(im.has_value());
        CHECK(im->pixel(0, 0)[0] == i);
    }
    CHECK_FALSE(stream.next().has_value());
}

TEST_CASE("xbd fixture loads field by field") {
    TempDir dir("xbd");
    using taxonomy::XbdLabel;
    const std::vector<XbdLabel> labels = {XbdLabel::NoDamage, XbdLabel::Destroyed,
                                          XbdLabel::MinorDamage, XbdLabel::Unclassified,
                                          XbdLabel::MajorDamage};
    auto files = testkit::gen_fixture_scene(dir.path, "quake-01", labels);
    ScenePair pair = load_xbd_scene(files, "quake-01", 5);

    CHECK(pair.scene_id == "quake-01");
    CHECK(pair.pre.frames.size() == 5);
    CHECK(pair.post.frames.size() == 5);
    CHECK(pair.pre.phase == Phase::pre);
    CHECK(pair.post.phase == Phase::post);
    REQUIRE(pair.buildings.size() == labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& b = pair.buildings[i];
        CHECK(b.building_id == "quake-01_b" + std::string(i < 10 ? "00" : "0") +
                                   std::to_string(i));
        CHECK(b.truth_label == labels[i]);
        CHECK(b.polygon.size() >= 3);
        CHECK_FALSE(b.missing_counterpart);
        // polygon lies inside the frame
        for (auto [x, y] : b.polygon) {
            CHECK(x >= 0);
            CHECK(y >= 0);
            CHECK(x <= pair.pre.frames[0].width());
            CHECK(y <= pair.pre.frames[0].height());
        }
    }
    // post image differs from pre for damaged buildings
    CHECK_FALSE(pair.pre.frames[0].image == pair.post.frames[0].image);
}

TEST_CASE("xbd loader flags pre-only buildings and rejects duplicates") {
    TempDir dir("xbd2");
    using taxonomy::XbdLabel;
    auto files = testkit::gen_fixture_scene(dir.path, "s1", {XbdLabel::NoDamage,
                                                             XbdLabel::Destroyed});

    // drop the second building from the post file: becomes missing_counterpart
    {
        auto doc = nlohmann::json::parse(std::ifstream(files.label_post));
        auto& feats = doc["features"]["xy"];
        feats.erase(feats.begin() + 1);
        std::ofstream out(files.label_post);
        out << doc.dump(2);
    }
    ScenePair pair = load_xbd_scene(files, "s1", 2);
    REQUIRE(pair.buildings.size() == 2);
    CHECK_FALSE(pair.buildings[0].missing_counterpart);
    CHECK(pair.buildings[1].missing_counterpart);
    CHECK_FALSE(pair.buildings[1].truth_label.has_value());  // truth comes from post

    // duplicate uid in one file is a schema error
    {
        auto doc = nlohmann::json::parse(std::ifstream(files.label_pre));
        auto& feats = doc["features"]["xy"];
        feats.push_back(feats[0]);
        std::ofstream out(files.label_pre);
        out << doc.dump(2);
    }
    CHECK_THROWS_AS(load_xbd_scene(files, "s1", 2), SchemaError);
}

TEST_CASE("xbd loader rejects out-of-bounds polygons") {
    TempDir dir("xbd3");
    auto files = testkit::gen_fixture_scene(dir.path, "s2", {taxonomy::XbdLabel::NoDamage});
    auto doc = nlohmann::json::parse(std::ifstream(files.label_post));
    doc["features"]["xy"][0]["wkt"] = "POLYGON ((-5 0, 10 0, 10 10, -5 10, -5 0))";
    std::ofstream(files.label_post) << doc.dump(2);
    CHECK_THROWS_AS(load_xbd_scene(files, "s2", 2), GeometryError);
}
