#include "aftermath/resample.hpp"

#include <algorithm>
#include <cmath>

namespace aftermath::img {

namespace {

inline int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

inline std::uint8_t quantize(double v) {
  double r = std::round(v);
  if (r <= 0.0) return 0;
  if (r >= 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

void check_scale(const Image& in, int scale) {
  if (scale < 1) throw Error("resample: scale must be >= 1");
  if (in.empty()) throw Error("resample: empty input image");
}

// One output row of the bicubic kernel. Shared by the serial and parallel
// entry points so both produce identical bytes.
void bicubic_row(const Image& in, Image& out, int scale, int oy) {
  const int w = in.width;
  const int h = in.height;
  const double sy = static_cast<double>(oy) / scale;
  const int by = static_cast<int>(std::floor(sy));

  double wy[4];
  for (int k = 0; k < 4; ++k) {
    wy[k] = catmull_rom_weight(sy - (by + k - 1));
  }

  for (int ox = 0; ox < out.width; ++ox) {
    const double sx = static_cast<double>(ox) / scale;
    const int bx = static_cast<int>(std::floor(sx));
    double wx[4];
    for (int k = 0; k < 4; ++k) {
      wx[k] = catmull_rom_weight(sx - (bx + k - 1));
    }

    double acc[3] = {0.0, 0.0, 0.0};
    for (int ky = 0; ky < 4; ++ky) {
      const int yy = clamp_index(by + ky - 1, h);
      for (int kx = 0; kx < 4; ++kx) {
        const int xx = clamp_index(bx + kx - 1, w);
        const double wgt = wy[ky] * wx[kx];
        const std::uint8_t* p = in.pixel(xx, yy);
        acc[0] += wgt * p[0];
        acc[1] += wgt * p[1];
        acc[2] += wgt * p[2];
      }
    }
    std::uint8_t* q = out.pixel(ox, oy);
    q[0] = quantize(acc[0]);
    q[1] = quantize(acc[1]);
    q[2] = quantize(acc[2]);
  }
}

void nearest_row(const Image& in, Image& out, int scale, int oy) {
  const int yy = oy / scale;
  for (int ox = 0; ox < out.width; ++ox) {
    const std::uint8_t* p = in.pixel(ox / scale, yy);
    std::uint8_t* q = out.pixel(ox, oy);
    q[0] = p[0];
    q[1] = p[1];
    q[2] = p[2];
  }
}

void bilinear_row(const Image& in, Image& out, double fx, double fy, int oy) {
  const int w = in.width;
  const int h = in.height;
  const double sy = oy * fy;
  const int y0 = clamp_index(static_cast<int>(std::floor(sy)), h);
  const int y1 = clamp_index(y0 + 1, h);
  const double ty = sy - std::floor(sy);

  for (int ox = 0; ox < out.width; ++ox) {
    const double sx = ox * fx;
    const int x0 = clamp_index(static_cast<int>(std::floor(sx)), w);
    const int x1 = clamp_index(x0 + 1, w);
    const double tx = sx - std::floor(sx);

    const std::uint8_t* p00 = in.pixel(x0, y0);
    const std::uint8_t* p10 = in.pixel(x1, y0);
    const std::uint8_t* p01 = in.pixel(x0, y1);
    const std::uint8_t* p11 = in.pixel(x1, y1);
    std::uint8_t* q = out.pixel(ox, oy);
    for (int c = 0; c < 3; ++c) {
      const double top = p00[c] + (p10[c] - p00[c]) * tx;
      const double bot = p01[c] + (p11[c] - p01[c]) * tx;
      q[c] = quantize(top + (bot - top) * ty);
    }
  }
}

Image alloc_output(const Image& in, int out_w, int out_h) {
  Image out;
  out.width = out_w;
  out.height = out_h;
  out.rgb.resize(static_cast<std::size_t>(out_w) * out_h * 3);
  (void)in;
  return out;
}

}  // namespace

double catmull_rom_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) {
    return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  }
  if (t < 2.0) {
    return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  }
  return 0.0;
}

Image bicubic_upscale_serial(const Image& in, int scale) {
  check_scale(in, scale);
  Image out = alloc_output(in, in.width * scale, in.height * scale);
  for (int oy = 0; oy < out.height; ++oy) {
    bicubic_row(in, out, scale, oy);
  }
  return out;
}

Image bicubic_upscale(const Image& in, int scale) {
  check_scale(in, scale);
  Image out = alloc_output(in, in.width * scale, in.height * scale);
#pragma omp parallel for schedule(static)
  for (int oy = 0; oy < out.height; ++oy) {
    bicubic_row(in, out, scale, oy);
  }
  return out;
}

Image nearest_upscale_serial(const Image& in, int scale) {
  check_scale(in, scale);
  Image out = alloc_output(in, in.width * scale, in.height * scale);
  for (int oy = 0; oy < out.height; ++oy) {
    nearest_row(in, out, scale, oy);
  }
  return out;
}

Image nearest_upscale(const Image& in, int scale) {
  check_scale(in, scale);
  Image out = alloc_output(in, in.width * scale, in.height * scale);
#pragma omp parallel for schedule(static)
  for (int oy = 0; oy < out.height; ++oy) {
    nearest_row(in, out, scale, oy);
  }
  return out;
}

Image bilinear_resize_serial(const Image& in, int out_width, int out_height) {
  if (in.empty() || out_width < 1 || out_height < 1) {
    throw Error("resample: invalid bilinear resize request");
  }
  Image out = alloc_output(in, out_width, out_height);
  const double fx = out_width > 1 ? static_cast<double>(in.width - 1) / (out_width - 1) : 0.0;
  const double fy = out_height > 1 ? static_cast<double>(in.height - 1) / (out_height - 1) : 0.0;
  for (int oy = 0; oy < out_height; ++oy) {
    bilinear_row(in, out, fx, fy, oy);
  }
  return out;
}

Image bilinear_resize(const Image& in, int out_width, int out_height) {
  if (in.empty() || out_width < 1 || out_height < 1) {
    throw Error("resample: invalid bilinear resize request");
  }
  Image out = alloc_output(in, out_width, out_height);
  const double fx = out_width > 1 ? static_cast<double>(in.width - 1) / (out_width - 1) : 0.0;
  const double fy = out_height > 1 ? static_cast<double>(in.height - 1) / (out_height - 1) : 0.0;
#pragma omp parallel for schedule(static)
  for (int oy = 0; oy < out_height; ++oy) {
    bilinear_row(in, out, fx, fy, oy);
  }
  return out;
}

std::pair<int, int> fit_within_edge(int width, int height, int max_edge) {
  if (max_edge < 1 || (width <= max_edge && height <= max_edge)) {
    return {width, height};
  }
  const int long_edge = std::max(width, height);
  const double f = static_cast<double>(max_edge) / long_edge;
  int w = std::max(1, static_cast<int>(std::lround(width * f)));
  int h = std::max(1, static_cast<int>(std::lround(height * f)));
  if (width >= height) {
    w = max_edge;
  } else {
    h = max_edge;
  }
  return {w, h};
}

}  // namespace aftermath::img
