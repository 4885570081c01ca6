#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "camo/discriminators.hpp"
#include "camo/generator.hpp"
#include "camo/random.hpp"

namespace camo::metrics {

/// Predicted label of a probability-of-real; exactly 0.5 counts as real.
Label decide(double p_real) noexcept;

/// Fraction of `p_real` whose decided label equals `label`. DomainError on
/// an empty set.
double accuracy(std::span<const double> p_real, Label label);
double accuracy(const DetectorHandle& d, std::span<const ImageF> images, Label label);

/// Mean local SSIM of BT.601 luma on the 8-bit scale: 11x11 Gaussian window
/// (sigma 1.5), K1 0.01, K2 0.03, L 255, windows fully inside the image.
double ssim(const ImageF& a, const ImageF& b);

/// PSNR in dB on the 8-bit scale over all channels; +infinity for identical
/// images (written as the string "inf" in reports).
double psnr(const ImageF& a, const ImageF& b);
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
nlohmann::json psnr_json(double db);

/// Frechet distance between Gaussian fits of two feature sets.
/// Covariances are unbiased; 1e-6 I is added to a singular covariance.
double frechet_distance(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b);
/// Closed form between two Gaussians given mean and covariance (row-major d x d).
double frechet_distance(std::span<const double> mu_a, std::span<const double> cov_a, std::span<const double> mu_b,
                        std::span<const double> cov_b, int d);
/// FID surrogate over the detector's pooled features.
double fid(const DetectorHandle& d, std::span<const ImageF> a, std::span<const ImageF> b);
inline constexpr const char* kFidExtractorTag = "FID-surrogate: desk detector pooled features";

enum class PostProcess { none, jpeg75, gaussian_filter, gaussian_noise };
inline constexpr PostProcess kPostProcesses[] = {PostProcess::none, PostProcess::jpeg75,
                                                 PostProcess::gaussian_filter, PostProcess::gaussian_noise};
std::string to_string(PostProcess p);
/// JPEG q=75, Gaussian filter (sigma 0.5, 5x5), Gaussian noise (sigma 0.01, mean 0).
ImageF apply_postprocess(const ImageF& img, PostProcess p, std::uint64_t seed);

/// One accuracy cell: how often images of one attack survive as "real".
struct AccuracyRow {
    std::string detector;
    std::string attack;
    std::string postprocess;
    double acc_real_as_real = 0.0;
    std::size_t n = 0;
};

/// Per-image decision behind an accuracy cell.
struct Verdict {
    std::string image;
    std::string detector;
    std::string attack;
    std::string postprocess;
    double p_real = 0.0;
    std::string predicted;
    nlohmann::json to_json() const;
};

/// Applies every post-process to `images` (already attacked), and measures
/// accuracy-as-real. Verdicts are appended when `verdicts` is given.
std::vector<AccuracyRow> robustness_suite(std::span<const ImageF> images, std::span<const std::string> ids,
                                          const DetectorHandle& d, const std::string& attack, std::uint64_t seed,
                                          std::vector<Verdict>* verdicts = nullptr);

/// Grad-CAM heatmap of `target` for the detector's last conv block, upsampled
/// bilinearly to the image size and normalized to max 1 (all zeros when the
/// map vanishes).
Plane grad_cam(const DetectorHandle& d, const ImageF& img, Label target);
/// Share of heatmap mass that falls inside the mask.
double mass_inside(const Plane& heatmap, const BinaryMask& mask);
/// Heatmap blended over the image (jet-like ramp), for PNG output.
ImageU8 heatmap_overlay(const ImageF& img, const Plane& heatmap);

struct PgdConfig {
    double epsilon = 8.0 / 255.0;
    int steps = 10;
    double step_size = 2.0 / 255.0;
};
/// L-infinity PGD lowering the detector's probability of real.
ImageF pgd_attack(const DetectorHandle& d, const ImageF& img, const PgdConfig& cfg);

/// Uniform draw over the ranges, kernels uniform over their sets.
CamouflageParams handcrafted_params(Rng& rng, const ParamRanges& ranges);

struct QualityBlock {
    double ssim = 0.0;
    double psnr = 0.0;
    double fid = 0.0;
    std::string fid_extractor = kFidExtractorTag;
    std::size_t n = 0;
};

/// Mean SSIM / PSNR over pairs and FID between the two sets.
QualityBlock quality(const DetectorHandle& d, std::span<const ImageF> clean, std::span<const ImageF> processed);

struct MetricsReport {
    std::vector<AccuracyRow> rows;
    std::vector<std::pair<std::string, QualityBlock>> quality;  // keyed by attack
    nlohmann::json config = nlohmann::json::object();

    nlohmann::json to_json() const;
    void write(const std::filesystem::path& path) const;
};

void write_verdicts(const std::filesystem::path& path, std::span<const Verdict> verdicts);
std::vector<Verdict> read_verdicts(const std::filesystem::path& path);

}  // namespace camo::metrics
