#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "camo/camouflage.hpp"
#include "camo/nn.hpp"

namespace camo {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Admissible range of every camouflage parameter.
struct ParamRanges {
    Interval mu_gn{-0.05, 0.05};
    Interval sigma_gn{0.0, 0.10};
    Interval sigma_gf{0.1, 3.0};
    Interval sigma_bl{0.5, 16.0};
    std::vector<int> k_gf{1, 3, 5, 7};
    std::vector<int> k_bl{3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 29, 31};

    /// Throws ConfigError unless every lo < hi and kernel sets are non-empty,
    /// odd, positive and ascending.
    void validate() const;
    /// True when `p` lies inside these ranges (kernels must be set members).
    bool contains(const CamouflageParams& p) const;

    nlohmann::json to_json() const;
    static ParamRanges from_json(const nlohmann::json& j);

    friend bool operator==(const ParamRanges&, const ParamRanges&) = default;
};

/// Nearest member of `allowed` (ascending); ties go to the smaller member.
int quantize_kernel(double v, const std::vector<int>& allowed);

/// Affine map of raw head outputs onto the ranges; kernel heads map onto
/// [min, max] of their set and are then quantized. Raw heads are kept in
/// `continuous`.
CamouflageParams map_heads_to_ranges(const std::array<double, kHeadCount>& heads,
                                     const ParamRanges& ranges);

/// Backbone CNN with six sigmoid heads (one linear layer with six outputs,
/// equivalent to six parallel fully connected heads).
class GeneratorModel {
public:
    GeneratorModel() = default;
    GeneratorModel(nn::NetSpec backbone, ParamRanges ranges, std::uint64_t init_seed);

    /// Sets the head biases so that, with zeroed head weights contribution
    /// aside, every head starts near `heads` (values in (0, 1)).
    void set_initial_heads(const std::array<double, kHeadCount>& heads);

    /// Default desk-scale backbone.
    static nn::NetSpec desk_backbone();

    const ParamRanges& ranges() const noexcept { return ranges_; }
    nn::ConvNet& net() noexcept { return net_; }
    const nn::ConvNet& net() const noexcept { return net_; }

    /// Raw head outputs in (0, 1) for each image of the batch. Caches the
    /// forward pass for backward_heads().
    std::vector<std::array<double, kHeadCount>> heads(std::span<const ImageF* const> images);
    std::array<double, kHeadCount> heads(const ImageF& image);

    /// Backpropagates dL/dheads (one array per image of the last heads() call)
    /// through the sigmoid into the network gradients.
    void backward_heads(std::span<const std::array<double, kHeadCount>> dheads);

    void save(const std::filesystem::path& path) const;
    /// Refuses to load when ranges or backbone differ from the expectation.
    static GeneratorModel load(const std::filesystem::path& path, const ParamRanges& expected_ranges,
                               const nn::NetSpec* expected_backbone = nullptr);
    static GeneratorModel load(const std::filesystem::path& path);

private:
    nn::ConvNet net_;
    ParamRanges ranges_;
    std::vector<std::array<double, kHeadCount>> last_heads_;
};

/// Applied values and raw heads, as written to per-image parameter logs.
nlohmann::json params_to_json(const CamouflageParams& p);

/// Heads squashed away from exactly 0 or 1 so logs stay finite.
inline constexpr double kHeadFloor = 1e-9;

/// Applied parameters for `image`. Throws ModelStateError on a non-finite head.
CamouflageParams generate_params(GeneratorModel& model, const ImageF& image);

}  // namespace camo
