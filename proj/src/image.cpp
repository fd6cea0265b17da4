#include "aftermath/image.hpp"

#include <png.h>

#include <cstring>
#include <fstream>

namespace aftermath::img {

Image solid_image(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Image im;
  im.width = width;
  im.height = height;
  im.rgb.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < im.rgb.size(); i += 3) {
    im.rgb[i] = r;
    im.rgb[i + 1] = g;
    im.rgb[i + 2] = b;
  }
  return im;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;

  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw ImageDecodeFailure(std::string("png decode: ") + png.message);
  }
  png.format = PNG_FORMAT_RGB;

  Image im;
  im.width = static_cast<int>(png.width);
  im.height = static_cast<int>(png.height);
  im.rgb.resize(PNG_IMAGE_SIZE(png));

  if (!png_image_finish_read(&png, nullptr, im.rgb.data(), 0, nullptr)) {
    png_image_free(&png);
    throw ImageDecodeFailure(std::string("png decode: ") + png.message);
  }
  return im;
}

std::vector<std::uint8_t> encode_png(const Image& im) {
  if (im.empty() || im.rgb.size() != static_cast<std::size_t>(im.width) * im.height * 3) {
    throw ImageDecodeFailure("png encode: malformed image buffer");
  }

  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(im.width);
  png.height = static_cast<png_uint_32>(im.height);
  png.format = PNG_FORMAT_RGB;

  // First call sizes the buffer, second call writes it.
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, im.rgb.data(), 0, nullptr)) {
    throw ImageDecodeFailure(std::string("png encode: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, im.rgb.data(), 0, nullptr)) {
    throw ImageDecodeFailure(std::string("png encode: ") + png.message);
  }
  out.resize(size);
  return out;
}

Image read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ImageDecodeFailure("cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

void write_png(const std::filesystem::path& path, const Image& im) {
  auto bytes = encode_png(im);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ImageDecodeFailure("cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw ImageDecodeFailure("short write to " + path.string());
  }
}

namespace {
constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}
}  // namespace

std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= data.size(); i += 3) {
    std::uint32_t n = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out.push_back(kB64Alphabet[(n >> 18) & 63]);
    out.push_back(kB64Alphabet[(n >> 12) & 63]);
    out.push_back(kB64Alphabet[(n >> 6) & 63]);
    out.push_back(kB64Alphabet[n & 63]);
  }
  if (i + 1 == data.size()) {
    std::uint32_t n = data[i] << 16;
    out.push_back(kB64Alphabet[(n >> 18) & 63]);
    out.push_back(kB64Alphabet[(n >> 12) & 63]);
    out.append("==");
  } else if (i + 2 == data.size()) {
    std::uint32_t n = (data[i] << 16) | (data[i + 1] << 8);
    out.push_back(kB64Alphabet[(n >> 18) & 63]);
    out.push_back(kB64Alphabet[(n >> 12) & 63]);
    out.push_back(kB64Alphabet[(n >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    int v = b64_value(c);
    if (v < 0) {
      throw Error("base64: invalid character");
    }
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
    }
  }
  return out;
}

}  // namespace aftermath::img
