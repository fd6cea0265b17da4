#include <doctest.h>

#include <random>

#include "aftermath/image.hpp"
#include "temp_dir.hpp"

using namespace aftermath::img;

namespace {

Image random_image(int w, int h, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> byte(0, 255);
    Image im = solid_image(w, h, 0, 0, 0);
    for (auto& b : im.rgb) b = static_cast<std::uint8_t>(byte(rng));
    return im;
}

}  // namespace

TEST_CASE("solid_image fills every pixel") {
    Image im = solid_image(3, 2, 10, 20, 30);
    CHECK(im.width == 3);
    CHECK(im.height == 2);
    CHECK(im.byte_size() == 18);
    for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 3; ++x) {
            const auto* p = im.pixel(x, y);
            CHECK(p[0] == 10);
            CHECK(p[1] == 20);
            CHECK(p[2] == 30);
        }
    }
}

TEST_CASE("png encode/decode round-trips pixel data") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 8; ++trial) {
        const int w = 1 + static_cast<int>(rng() % 40);
        const int h = 1 + static_cast<int>(rng() % 40);
        Image im = random_image(w, h, rng());
        Image back = decode_png(encode_png(im));
        CHECK(back == im);
    }
}

TEST_CASE("png file io round-trips") {
    TempDir dir("png");
    Image im = random_image(31, 17, 99);
    write_png(dir / "a.png", im);
    CHECK(read_png(dir / "a.png") == im);
}

TEST_CASE("decode rejects garbage") {
    std::vector<std::uint8_t> junk = {1, 2, 3, 4, 5, 6, 7, 8};
    CHECK_THROWS_AS(decode_png(junk), ImageDecodeFailure);
    CHECK_THROWS_AS(read_png("/nonexistent/nope.png"), aftermath::Error);
}

TEST_CASE("base64 known vectors") {
    auto enc = [](std::string s) {
        return base64_encode(std::span<const std::uint8_t>(
            reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    };
    CHECK(enc("") == "");
    CHECK(enc("f") == "Zg==");
    CHECK(enc("fo") == "Zm8=");
    CHECK(enc("foo") == "Zm9v");
    CHECK(enc("foobar") == "Zm9vYmFy");
}

TEST_CASE("base64 round-trips random buffers") {
    std::mt19937 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::uint8_t> buf(rng() % 200);
        for (auto& b : buf) b = static_cast<std::uint8_t>(rng() % 256);
        auto text = base64_encode(buf);
        CHECK(base64_decode(text) == buf);
    }
}

TEST_CASE("base64 decode tolerates whitespace, rejects bad symbols") {
    CHECK(base64_decode("Zm9v") == std::vector<std::uint8_t>{'f', 'o', 'o'});
    CHECK(base64_decode("Zm9v\nYmFy") ==
          std::vector<std::uint8_t>{'f', 'o', 'o', 'b', 'a', 'r'});
    CHECK_THROWS_AS(base64_decode("Zm9$"), aftermath::Error);
}
