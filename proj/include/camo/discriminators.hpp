#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "camo/camouflage.hpp"
#include "camo/face_record.hpp"
#include "camo/nn.hpp"

namespace camo {

class DatasetManifest;

/// Detector activations and gradients for one image, for Grad-CAM and PGD.
struct DetectorProbe {
    double p_real = 0.0;
    double logit = 0.0;
    nn::Tensor last_conv;       // 1 x C x h x w
    nn::Tensor last_conv_grad;  // d(score)/d(last_conv)
    ImageF input_grad;          // d(score)/d(pixel), [0, 1] pixel units
};

/// Frozen real/fake classifier. Output is the probability that the input is
/// real. Prediction never touches the stored weights, so one handle can be
/// shared by concurrent readers.
class DetectorHandle {
public:
    DetectorHandle() = default;
    DetectorHandle(nn::ConvNet net, std::string name, nlohmann::json provenance, int input_size);

    static DetectorHandle load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    const std::string& name() const noexcept { return name_; }
    void set_name(std::string name) { name_ = std::move(name); }
    const nlohmann::json& provenance() const noexcept { return provenance_; }
    int input_size() const noexcept { return input_size_; }
    bool has_gradients() const noexcept { return gradients_; }
    void set_gradients(bool enabled) noexcept { gradients_ = enabled; }
    bool loaded() const noexcept { return input_size_ > 0; }

    double predict(const ImageF& img) const;
    std::vector<double> predict(std::span<const ImageF> images) const;
    /// Pooled penultimate features (FID surrogate extractor), one row per image.
    std::vector<std::vector<double>> features(std::span<const ImageF> images) const;

    /// Forward and backward pass for `score` = `sign` * logit. Throws
    /// CapabilityError when the handle has no gradient access.
    DetectorProbe probe(const ImageF& img, double sign) const;

    std::uint64_t param_hash() const { return net_.param_hash(); }
    const nn::ConvNet& net() const noexcept { return net_; }

private:
    void check_input(const ImageF& img) const;

    nn::ConvNet net_;
    std::string name_;
    nlohmann::json provenance_ = nlohmann::json::object();
    int input_size_ = 0;
    bool gradients_ = true;
};

/// Visual discriminator V: a small CNN that sees a box-downsampled copy of the
/// image, so it judges coarse visible damage rather than pixel statistics.
/// Output is the probability the input looks real.
class VisualDiscriminator {
public:
    struct Spec {
        nn::NetSpec net{3, {16, 32, 32}, 1, 0.05f};
        int downsample = 4;
    };

    VisualDiscriminator() = default;
    VisualDiscriminator(Spec spec, std::uint64_t init_seed, double lr);

    double predict(const ImageF& img) const;
    std::vector<double> predict(std::span<const ImageF* const> images) const;

    const Spec& spec() const noexcept { return spec_; }
    nn::ConvNet& net() noexcept { return net_; }
    nn::Optimizer& optimizer() noexcept { return opt_; }

    void save(const std::filesystem::path& path) const;
    static VisualDiscriminator load(const std::filesystem::path& path, double lr);

private:
    Spec spec_;
    nn::ConvNet net_;
    nn::Optimizer opt_{nn::OptimizerKind::rmsprop, 1e-4};
};

/// Box average over `factor` x `factor` blocks (dimensions must divide).
ImageF downsample_box(const ImageF& img, int factor);

/// Images for one visual-discriminator step, grouped by role.
struct VisualBatch {
    std::vector<const ImageF*> real;         // x_r, target real
    std::vector<const ImageF*> fake;         // x_f, target fake
    std::vector<const ImageF*> camouflaged;  // x*_r, target fake
};

/// Per-role mean binary cross-entropy terms of the visual objective.
struct VisualLoss {
    double real = 0.0;
    double fake = 0.0;
    double camouflaged = 0.0;
    double total() const noexcept { return real + fake + camouflaged; }
};

/// -log V(x_r) - log(1 - V(x_f)) - log(1 - V(x*_r)) with every probability
/// floored at `eps`.
VisualLoss visual_loss(double v_real, double v_fake, double v_camouflaged, double eps = 1e-6);

/// One RMSProp step on V minimizing the role-wise cross-entropy of `batch`.
/// Returns the objective measured before the step. Throws DomainError when a
/// role is empty.
VisualLoss train_visual_step(VisualDiscriminator& v, const VisualBatch& batch);

enum class Strength { low, med, high };

Strength parse_strength(const std::string& s);
std::string to_string(Strength s);

/// Fixed handcrafted parameters of each pseudo-fake tier.
CamouflageParams pseudo_fake_params(Strength strength);

/// A real face given blending inconsistency at the requested tier.
ImageF make_pseudo_fake(const FaceRecord& record, Strength strength, std::uint64_t seed);

struct DetectorTrainConfig {
    int max_epochs = 30;
    int min_epochs = 16;
    int batch = 16;  // reals per step; as many pseudo-fakes are added
    double lr = 1e-3;
    double gate = 0.90;
    std::uint64_t seed = 7;
    bool augment = true;
    nn::NetSpec backbone{3, {16, 32, 64, 64}, 1, 0.05f, 3.0f};
    std::string name = "desk-detector";

    nlohmann::json to_json() const;
    static DetectorTrainConfig from_json(const nlohmann::json& j);
};

struct DetectorTrainResult {
    DetectorHandle detector;
    double balanced_accuracy = 0.0;
    double tpr_real = 0.0;  // held-out reals predicted real
    double tnr_fake = 0.0;  // held-out pseudo-fakes predicted fake
    int epochs = 0;
    std::size_t holdout_images = 0;
    std::vector<nlohmann::json> history;
};

/// Held-out gate set: each real with one pseudo-fake (tiers alternate
/// med/high, seeds fixed by index).
struct HoldoutSet {
    std::vector<ImageF> reals;
    std::vector<ImageF> fakes;
};
HoldoutSet make_holdout(std::span<const FaceRecord> reals, std::uint64_t seed);

struct GateResult {
    double balanced_accuracy = 0.0;
    double tpr_real = 0.0;
    double tnr_fake = 0.0;
};
GateResult evaluate_gate(const DetectorHandle& d, const HoldoutSet& holdout);

/// Trains the desk detector on train reals versus on-the-fly med/high
/// pseudo-fakes until the held-out balanced accuracy reaches cfg.gate.
/// Held-out data is the test split when it has at least 50 reals, else the
/// tail of the train split. Throws PreconditionError for fewer than 200 train
/// reals or when the gate is not met within cfg.max_epochs.
DetectorTrainResult train_desk_detector(std::vector<FaceRecord> train, std::vector<FaceRecord> holdout,
                                        const DetectorTrainConfig& cfg);
DetectorTrainResult train_desk_detector(const DatasetManifest& manifest, const DetectorTrainConfig& cfg,
                                        int size = 128);

/// Random augmentation shared by detector training: JPEG, light filtering,
/// light noise, horizontal flip.
ImageF augment(const ImageF& img, std::uint64_t seed);

}  // namespace camo
