#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aftermath/errors.hpp"

namespace aftermath::img {

struct ImageDecodeFailure : Error {
  using Error::Error;
};

/// 8-bit RGB raster, row-major, tightly packed (3 bytes per pixel).
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  bool empty() const { return width == 0 || height == 0; }

  std::size_t byte_size() const { return rgb.size(); }

  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  std::uint8_t* pixel(int x, int y) {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  bool operator==(const Image& other) const = default;
};

/// Allocates a width x height image filled with one color.
Image solid_image(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b);

Image decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Image& im);
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& im);

std::string base64_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace aftermath::img
