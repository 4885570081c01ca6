#pragma once

#include <array>
#include <cstdint>

#include "camo/image.hpp"

namespace camo {

struct FaceRecord;

/// Index of each generator head. Order follows the parameter listing of the
/// configuration generator: noise std, noise mean, filter std, filter size,
/// mask-blur std, mask-blur size.
enum class Head : int { SigmaGn = 0, MuGn, SigmaGf, KGf, SigmaBl, KBl };
inline constexpr int kHeadCount = 6;

inline constexpr int head_index(Head h) noexcept { return static_cast<int>(h); }

/// The six camouflage parameters in applied form, plus the raw head outputs
/// in [0, 1] they were mapped from (needed by the visual-constraint loss).
struct CamouflageParams {
    double mu_gn = 0.0;
    double sigma_gn = 0.0;
    int k_gf = 1;
    double sigma_gf = 1.0;
    int k_bl = 1;
    double sigma_bl = 1.0;
    std::array<double, kHeadCount> continuous{};

    /// Every operation is a no-op: zero noise, 1x1 filter and mask kernels.
    static CamouflageParams identity() noexcept;

    friend bool operator==(const CamouflageParams&, const CamouflageParams&) = default;
};

/// clamp(img + n), n ~ Normal(mu, sigma^2) i.i.d. per value, stream fixed by `seed`.
ImageF add_gaussian_noise(const ImageF& img, double mu_gn, double sigma_gn, std::uint64_t seed);

/// k x k normalized Gaussian weights on the centered integer grid.
Plane gaussian_kernel(int k, double sigma);

/// Per-channel Gaussian filter with reflect borders, output clamped to [0, 1].
ImageF gaussian_filter(const ImageF& img, int k, double sigma);
Plane gaussian_filter(const Plane& plane, int k, double sigma);

/// Gaussian-blurred binary mask. Identical to the input when k_bl == 1.
SoftMask make_soft_mask(const BinaryMask& binary_mask, int k_bl, double sigma_bl);

/// processed * M + original * (1 - M).
ImageF blend(const ImageF& processed, const ImageF& original, const SoftMask& mask);

/// noise -> clamp -> filter -> clamp -> soft-mask blend into the original.
ImageF camouflage(const ImageF& image, const BinaryMask& hull, const CamouflageParams& params,
                  std::uint64_t seed);
ImageF camouflage(const FaceRecord& record, const CamouflageParams& params, std::uint64_t seed);

}  // namespace camo
