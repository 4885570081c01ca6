#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "camo/error.hpp"

namespace camo {

/// Row-major interleaved raster of `Channels` values per pixel.
template <typename T, int Channels>
class Raster {
public:
    static constexpr int channels = Channels;
    using value_type = T;

    Raster() = default;
    Raster(int height, int width, T fill = T{}) : height_(height), width_(width)
    {
        if (height <= 0 || width <= 0) {
            throw DomainError("raster dimensions must be positive");
        }
        data_.assign(static_cast<std::size_t>(height) * width * Channels, fill);
    }

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height_) * width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& at(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
    const T& at(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }

    bool same_shape(const Raster& other) const noexcept
    {
        return height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    std::size_t index(int y, int x, int c) const noexcept
    {
        return (static_cast<std::size_t>(y) * width_ + x) * Channels + c;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<T> data_;
};

/// Working-form RGB image, every value in [0, 1].
using ImageF = Raster<double, 3>;
/// Single-channel real plane (filter scratch, heatmaps).
using Plane = Raster<double, 1>;
/// Stored 8-bit RGB image.
using ImageU8 = Raster<std::uint8_t, 3>;
/// Binary mask, values exactly 0 or 1.
using BinaryMask = Raster<std::uint8_t, 1>;

/// Per-pixel blending weights in [0, 1].
struct SoftMask {
    Plane weights;

    int height() const noexcept { return weights.height(); }
    int width() const noexcept { return weights.width(); }
};

ImageF to_float(const ImageU8& img);
/// Rounds to nearest 8-bit level after clamping to [0, 1].
ImageU8 to_u8(const ImageF& img);

/// ITU-R BT.601 luma on the 8-bit scale (0..255).
Plane luma_255(const ImageF& img);

Plane to_plane(const BinaryMask& mask);

void clamp_unit(std::span<double> values) noexcept;

double max_abs_diff(const ImageF& a, const ImageF& b);

}  // namespace camo
