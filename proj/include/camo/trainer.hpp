#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "camo/discriminators.hpp"
#include "camo/generator.hpp"

namespace camo {

/// How the reinforcement signal steers the parameters.
///  - literal: theta <- theta - eta * P * grad(L_vc), so P > 0 lowers L_vc.
///  - corrective: theta <- theta + eta * P * grad(L_vc), so P > 0 raises the
///    camouflage strength while the detector still sees a real face.
enum class Orientation { literal, corrective };

/// adaptive: the effective gradient goes through RMSProp.
/// exact: plain SGD, so one step is exactly theta - eta * P * grad.
enum class UpdateMode { adaptive, exact };

struct TrainConfig {
    double eta = 1e-3;
    double lambda = 0.55;
    int batch = 8;
    int max_steps = 600;
    int visual_steps = 1;  // visual-discriminator steps per generator step
    std::uint64_t seed = 1;
    double eps_log = 1e-6;
    UpdateMode mode = UpdateMode::adaptive;
    Orientation orientation = Orientation::corrective;
    bool visual_enabled = true;
    double mu_pull = 1e-3;
    double visual_lr = 5e-4;
    int visual_downsample = 4;
    int checkpoint_every = 25;
    double ssim_target = 0.96;
    double ssim_weight = 10.0;
    /// Starting head values: mild filtering and noise, a wide soft mask.
    std::array<double, kHeadCount> init_heads{0.1, 0.5, 0.1, 0.1, 0.9, 0.9};

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

/// One generator step, as written to the JSON-lines training log.
struct TrainLogRecord {
    int step = 0;
    double l_ds = 0.0;
    double l_vi = 0.0;
    double l_vc = 0.0;
    double penalty = 0.0;
    double p_real = 0.0;  // detector on the step's camouflaged images
    double visual_loss = 0.0;
    std::array<double, kHeadCount> param_means{};  // applied values, head order

    nlohmann::json to_json() const;
    static TrainLogRecord from_json(const nlohmann::json& j);
};

/// log(max(p, eps)).
double loss_ds(double p_real, double eps_log = 1e-6);

/// log m_gf + log m_gn - log m_bl with m_gf = h_sgf h_kgf, m_gn = h_sgn,
/// m_bl = h_sbl h_kbl (raw heads, each floored at eps_log).
double loss_vc(const std::array<double, kHeadCount>& heads, double eps_log = 1e-6);
/// d loss_vc / d heads (zero for a head held at its floor and for mu).
std::array<double, kHeadCount> loss_vc_grad(const std::array<double, kHeadCount>& heads, double eps_log = 1e-6);

/// exp(s(L_ds)) - lambda exp(s(L_vi)), s the logistic function.
double penalty(double l_ds, double l_vi, double lambda);

/// theta <- theta - eta * p * grad, in place.
void rl_update(std::span<double> theta, std::span<const double> grad_l_vc, double eta, double p);

/// Generator-side visual term: -log max(V(x*), eps).
double generator_visual_loss(double v_camouflaged, double eps_log = 1e-6);

struct StepOutput {
    TrainLogRecord record;
    std::vector<ImageF> camouflaged;
};

/// Renders the batch with the current generator, scores it with D (and V
/// when given) and applies one reinforcement step to the generator.
/// Throws ModelStateError with the step state when anything is non-finite.
StepOutput generator_update_step(GeneratorModel& g, std::span<const FaceRecord* const> batch,
                                 const VisualDiscriminator* v, const DetectorHandle& d, const TrainConfig& cfg,
                                 nn::Optimizer& opt, std::uint64_t seed, int step);

/// Camouflage success and quality of a generator on a validation slice.
struct Validation {
    int step = 0;
    double success = 0.0;  // share of camouflaged images the detector calls fake
    double ssim = 0.0;
    double composite = 0.0;
    nlohmann::json to_json() const;
};
Validation validate_generator(GeneratorModel& g, std::span<const FaceRecord> val, const DetectorHandle& d,
                              const TrainConfig& cfg, int step);

struct TrainResult {
    GeneratorModel generator;  // the selected checkpoint
    VisualDiscriminator visual;
    std::vector<TrainLogRecord> log;
    std::vector<Validation> validations;
    int selected_step = 0;
    GateResult detector_gate;
};

/// Adversarial alternation of generator and visual-discriminator steps.
/// `val` reals measure the detector gate before training (refusing to start
/// below `gate`) and select the final checkpoint by
/// success - ssim_weight * max(0, ssim_target - ssim).
/// `on_step` (optional) sees every log record as it is produced.
TrainResult train_camgan(std::span<const FaceRecord> train, std::span<const FaceRecord> val,
                         const DetectorHandle& d, const TrainConfig& cfg, double gate = 0.90,
                         const std::function<void(const TrainLogRecord&)>& on_step = {});

std::string to_string(Orientation o);
std::string to_string(UpdateMode m);

}  // namespace camo
