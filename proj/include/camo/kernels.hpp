#pragma once

// Data-parallel inner loops. Each kernel parallelizes over output rows with
// OpenMP; results never depend on the thread count because no kernel reduces
// across rows. Serial brute-force counterparts live in reference/.

#include <span>
#include <vector>

#include "camo/image.hpp"

namespace camo::kernels {

/// Half-sample symmetric reflection (dcba|abcd|dcba) for any offset.
int reflect_index(int i, int n) noexcept;

/// Normalized 1-D Gaussian taps; the 2-D kernel is their outer product.
std::vector<double> gaussian_taps(int k, double sigma);

/// Correlates every channel of an interleaved raster with a separable kernel
/// (`taps` applied along x, then along y). Reflect borders.
void separable_filter(const double* src, double* dst, int height, int width, int channels,
                      std::span<const double> taps);

/// dst = clamp(src + mu + sigma * N(0,1)[seed, i]) over all values.
void add_noise(std::span<const double> src, std::span<double> dst, double mu, double sigma,
               std::uint64_t seed) noexcept;

/// out = processed * m + original * (1 - m), mask broadcast over 3 channels.
void blend(const ImageF& processed, const ImageF& original, const Plane& mask, ImageF& out) noexcept;

}  // namespace camo::kernels
