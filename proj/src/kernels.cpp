#include "camo/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "camo/error.hpp"
#include "camo/random.hpp"

namespace camo::kernels {

int reflect_index(int i, int n) noexcept
{
    if (n == 1) {
        return 0;
    }
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) {
        m += period;
    }
    return m < n ? m : period - 1 - m;
}

std::vector<double> gaussian_taps(int k, double sigma)
{
    if (k < 1 || k % 2 == 0) {
        throw ParameterError("gaussian kernel size must be a positive odd integer, got " +
                             std::to_string(k));
    }
    if (k == 1) {
        return {1.0};
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ParameterError("gaussian sigma must be positive and finite");
    }
    const int r = k / 2;
    std::vector<double> taps(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        taps[static_cast<std::size_t>(i + r)] = v;
        sum += v;
    }
    for (double& v : taps) {
        v /= sum;
    }
    return taps;
}

void separable_filter(const double* src, double* dst, int height, int width, int channels,
                      std::span<const double> taps)
{
    const int k = static_cast<int>(taps.size());
    const int r = k / 2;
    const std::size_t row_len = static_cast<std::size_t>(width) * channels;

    std::vector<int> xmap(static_cast<std::size_t>(width + 2 * r));
    for (int i = 0; i < width + 2 * r; ++i) {
        xmap[static_cast<std::size_t>(i)] = reflect_index(i - r, width);
    }
    std::vector<int> ymap(static_cast<std::size_t>(height + 2 * r));
    for (int i = 0; i < height + 2 * r; ++i) {
        ymap[static_cast<std::size_t>(i)] = reflect_index(i - r, height);
    }

    std::vector<double> tmp(row_len * height);

#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y) {
        const double* in = src + y * row_len;
        double* out = tmp.data() + y * row_len;
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                double acc = 0.0;
                for (int t = 0; t < k; ++t) {
                    acc += taps[static_cast<std::size_t>(t)] *
                           in[static_cast<std::size_t>(xmap[static_cast<std::size_t>(x + t)]) * channels + c];
                }
                out[static_cast<std::size_t>(x) * channels + c] = acc;
            }
        }
    }

#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y) {
        double* out = dst + y * row_len;
        std::fill(out, out + row_len, 0.0);
        for (int t = 0; t < k; ++t) {
            const double w = taps[static_cast<std::size_t>(t)];
            const double* in = tmp.data() + static_cast<std::size_t>(ymap[static_cast<std::size_t>(y + t)]) * row_len;
            for (std::size_t i = 0; i < row_len; ++i) {
                out[i] += w * in[i];
            }
        }
    }
}

void add_noise(std::span<const double> src, std::span<double> dst, double mu, double sigma,
               std::uint64_t seed) noexcept
{
    const auto n = static_cast<std::ptrdiff_t>(src.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double z = normal_at(seed, 0, static_cast<std::uint64_t>(i));
        dst[static_cast<std::size_t>(i)] =
            std::clamp(src[static_cast<std::size_t>(i)] + mu + sigma * z, 0.0, 1.0);
    }
}

void blend(const ImageF& processed, const ImageF& original, const Plane& mask, ImageF& out) noexcept
{
    const int h = processed.height();
    const int w = processed.width();
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double m = mask.at(y, x);
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = processed.at(y, x, c) * m + original.at(y, x, c) * (1.0 - m);
            }
        }
    }
}

}  // namespace camo::kernels
