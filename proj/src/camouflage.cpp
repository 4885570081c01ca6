#include "camo/camouflage.hpp"

#include <cmath>

#include "camo/face_record.hpp"
#include "camo/kernels.hpp"

namespace camo {

CamouflageParams CamouflageParams::identity() noexcept
{
    CamouflageParams p;
    p.mu_gn = 0.0;
    p.sigma_gn = 0.0;
    p.k_gf = 1;
    p.k_bl = 1;
    return p;
}

ImageF add_gaussian_noise(const ImageF& img, double mu_gn, double sigma_gn, std::uint64_t seed)
{
    if (!(sigma_gn >= 0.0) || !std::isfinite(sigma_gn) || !std::isfinite(mu_gn)) {
        throw ParameterError("noise sigma must be finite and non-negative");
    }
    if (sigma_gn == 0.0 && mu_gn == 0.0) {
        return img;
    }
    ImageF out(img.height(), img.width());
    kernels::add_noise(img.values(), out.values(), mu_gn, sigma_gn, seed);
    return out;
}

Plane gaussian_kernel(int k, double sigma)
{
    const auto taps = kernels::gaussian_taps(k, sigma);
    Plane kernel(k, k);
    for (int y = 0; y < k; ++y) {
        for (int x = 0; x < k; ++x) {
            kernel.at(y, x) = taps[static_cast<std::size_t>(y)] * taps[static_cast<std::size_t>(x)];
        }
    }
    return kernel;
}

namespace {

template <typename R>
R filter_raster(const R& src, int k, double sigma)
{
    const auto taps = kernels::gaussian_taps(k, sigma);
    if (k == 1) {
        return src;
    }
    R out(src.height(), src.width());
    kernels::separable_filter(src.data(), out.data(), src.height(), src.width(), R::channels, taps);
    clamp_unit(out.values());
    return out;
}

}  // namespace

ImageF gaussian_filter(const ImageF& img, int k, double sigma) { return filter_raster(img, k, sigma); }

Plane gaussian_filter(const Plane& plane, int k, double sigma)
{
    return filter_raster(plane, k, sigma);
}

SoftMask make_soft_mask(const BinaryMask& binary_mask, int k_bl, double sigma_bl)
{
    for (auto v : binary_mask.values()) {
        if (v > 1) {
            throw DomainError("make_soft_mask: mask must contain only 0 and 1");
        }
    }
    return SoftMask{gaussian_filter(to_plane(binary_mask), k_bl, sigma_bl)};
}

ImageF blend(const ImageF& processed, const ImageF& original, const SoftMask& mask)
{
    if (!processed.same_shape(original) || processed.height() != mask.height() ||
        processed.width() != mask.width()) {
        throw DomainError("blend: processed, original and mask shapes differ");
    }
    ImageF out(processed.height(), processed.width());
    kernels::blend(processed, original, mask.weights, out);
    return out;
}

ImageF camouflage(const ImageF& image, const BinaryMask& hull, const CamouflageParams& params,
                  std::uint64_t seed)
{
    if (params.k_gf == 1 && params.sigma_gn == 0.0 && params.mu_gn == 0.0) {
        // Nothing to blend in; skipping avoids m x + (1 - m) x rounding.
        if (hull.height() != image.height() || hull.width() != image.width()) {
            throw DomainError("camouflage: mask and image shapes differ");
        }
        kernels::gaussian_taps(params.k_bl, params.sigma_bl);  // argument checks only
        return image;
    }
    const ImageF noised = add_gaussian_noise(image, params.mu_gn, params.sigma_gn, seed);
    const ImageF filtered = gaussian_filter(noised, params.k_gf, params.sigma_gf);
    const SoftMask mask = make_soft_mask(hull, params.k_bl, params.sigma_bl);
    return blend(filtered, image, mask);
}

ImageF camouflage(const FaceRecord& record, const CamouflageParams& params, std::uint64_t seed)
{
    return camouflage(record.image, record.hull_mask, params, seed);
}

}  // namespace camo
