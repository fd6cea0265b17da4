#pragma once

#include "aftermath/image.hpp"

namespace aftermath::img {

// Raster resampling kernels. Each kernel has a serial reference implementation
// and an OpenMP-parallel variant; both compute identical bytes, and the unit
// tests assert this on random inputs. Coordinate convention: an output pixel x
// samples the source at x / scale (a grid point of the source lands on a grid
// point of the output, so scale 1 is the identity).

/// Bicubic upscale by an integer factor, Catmull-Rom kernel (a = -0.5),
/// channel-independent, edge-clamped. Samples are rounded half away from zero
/// and clamped to [0, 255].
Image bicubic_upscale_serial(const Image& in, int scale);
Image bicubic_upscale(const Image& in, int scale);

/// Nearest-neighbor upscale by an integer factor (block replication).
Image nearest_upscale_serial(const Image& in, int scale);
Image nearest_upscale(const Image& in, int scale);

/// Bilinear resize to an arbitrary size, edge-clamped. Used for the
/// downscale-before-send bound on chat clients.
Image bilinear_resize_serial(const Image& in, int out_width, int out_height);
Image bilinear_resize(const Image& in, int out_width, int out_height);

/// Catmull-Rom weight at offset t, exposed so tests can check tap values.
double catmull_rom_weight(double t);

/// Output size that fits a raster inside max_edge while keeping aspect ratio.
/// Images already within the bound are left at their native size.
std::pair<int, int> fit_within_edge(int width, int height, int max_edge);

}  // namespace aftermath::img
