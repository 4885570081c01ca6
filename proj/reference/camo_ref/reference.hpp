#pragma once

// Serial, deliberately naive counterparts of the library kernels. They share
// no code with src/ beyond the image containers and the Philox stream, and
// exist only as test oracles and benchmark baselines.

#include <cstdint>
#include <span>
#include <vector>

#include "camo/geometry.hpp"
#include "camo/image.hpp"

namespace camo::ref {

/// Mirror index with the edge sample repeated (dcba|abcd|dcba), written as an
/// explicit fold loop.
int mirror(int i, int n);

/// 2-D Gaussian weights evaluated directly from exp(-(x^2 + y^2) / 2 s^2).
Plane gaussian_kernel_2d(int k, double sigma);

/// Full 2-D correlation of every channel with `kernel`, mirrored borders,
/// no clamping.
ImageF convolve_2d(const ImageF& img, const Plane& kernel);

/// Value-by-value loop over the normal stream, clamped to [0, 1].
ImageF add_noise(const ImageF& img, double mu, double sigma, std::uint64_t seed);

ImageF blend(const ImageF& processed, const ImageF& original, const Plane& mask);

/// Hull vertices by testing every ordered pair as a candidate edge (O(n^3)).
/// Returned in no particular order.
std::vector<Point> hull_vertices(std::span<const Point> points);

/// Pixel cells that touch a convex polygon, by a separating-axis test per cell.
BinaryMask rasterize_polygon(std::span<const Point> polygon, int height, int width);

/// Every mask pixel paired with every other, lines drawn until stable.
BinaryMask segment_closure(BinaryMask mask);

/// SSIM evaluated window by window with the 2-D Gaussian weights.
double ssim(const ImageF& a, const ImageF& b);

double psnr(const ImageF& a, const ImageF& b);

}  // namespace camo::ref
