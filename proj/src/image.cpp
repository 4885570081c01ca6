#include "camo/image.hpp"

#include <algorithm>
#include <cmath>

namespace camo {

ImageF to_float(const ImageU8& img)
{
    ImageF out(img.height(), img.width());
    auto src = img.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = src[i] / 255.0;
    }
    return out;
}

ImageU8 to_u8(const ImageF& img)
{
    ImageU8 out(img.height(), img.width());
    auto src = img.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double v = std::clamp(src[i], 0.0, 1.0) * 255.0;
        dst[i] = static_cast<std::uint8_t>(std::lround(v));
    }
    return out;
}

Plane luma_255(const ImageF& img)
{
    Plane out(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            out.at(y, x) = 255.0 * (0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                                    0.114 * img.at(y, x, 2));
        }
    }
    return out;
}

Plane to_plane(const BinaryMask& mask)
{
    Plane out(mask.height(), mask.width());
    auto src = mask.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = src[i];
    }
    return out;
}

void clamp_unit(std::span<double> values) noexcept
{
    for (double& v : values) {
        v = std::clamp(v, 0.0, 1.0);
    }
}

double max_abs_diff(const ImageF& a, const ImageF& b)
{
    if (!a.same_shape(b)) {
        throw DomainError("max_abs_diff: shape mismatch");
    }
    double m = 0.0;
    auto va = a.values();
    auto vb = b.values();
    for (std::size_t i = 0; i < va.size(); ++i) {
        m = std::max(m, std::abs(va[i] - vb[i]));
    }
    return m;
}

}  // namespace camo
