#include "camo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "camo/error.hpp"
#include "camo/log.hpp"
#include "camo/metrics.hpp"
#include "camo/random.hpp"

namespace camo {

using nlohmann::json;

std::string to_string(Orientation o) { return o == Orientation::literal ? "literal" : "corrective"; }
std::string to_string(UpdateMode m) { return m == UpdateMode::exact ? "exact" : "adaptive"; }

void TrainConfig::validate() const
{
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be non-negative");
    if (!(eps_log > 0.0)) throw ConfigError("eps_log must be positive");
    if (batch < 1) throw ConfigError("batch must be at least 1");
    if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
    if (visual_steps < 0) throw ConfigError("visual_steps must be non-negative");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be at least 1");
    if (!(visual_lr > 0.0)) throw ConfigError("visual_lr must be positive");
    if (visual_downsample < 1) throw ConfigError("visual_downsample must be at least 1");
    if (!(mu_pull >= 0.0)) throw ConfigError("mu_pull must be non-negative");
    for (double h : init_heads) {
        if (!(h > 0.0 && h < 1.0)) throw ConfigError("init_heads must lie strictly inside (0, 1)");
    }
}

json TrainConfig::to_json() const
{
    return json{{"eta", eta},
                {"lambda", lambda},
                {"batch", batch},
                {"max_steps", max_steps},
                {"visual_steps", visual_steps},
                {"seed", seed},
                {"eps_log", eps_log},
                {"mode", to_string(mode)},
                {"orientation", to_string(orientation)},
                {"visual_enabled", visual_enabled},
                {"mu_pull", mu_pull},
                {"visual_lr", visual_lr},
                {"visual_downsample", visual_downsample},
                {"checkpoint_every", checkpoint_every},
                {"ssim_target", ssim_target},
                {"ssim_weight", ssim_weight},
                {"init_heads", init_heads}};
}

TrainConfig TrainConfig::from_json(const json& j)
{
    TrainConfig c;
    if (!j.is_object()) {
        throw ConfigError("training config must be a JSON object");
    }
    static const char* known[] = {"eta",          "lambda",    "batch",           "max_steps",
                                  "visual_steps", "seed",      "eps_log",         "mode",
                                  "orientation",  "visual_enabled", "mu_pull",   "visual_lr",
                                  "visual_downsample", "checkpoint_every", "ssim_target", "ssim_weight", "init_heads"};
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
            std::end(known)) {
            throw ConfigError("unknown training config key '" + key + "'");
        }
    }
    try {
        c.eta = j.value("eta", c.eta);
        c.lambda = j.value("lambda", c.lambda);
        c.batch = j.value("batch", c.batch);
        c.max_steps = j.value("max_steps", c.max_steps);
        c.visual_steps = j.value("visual_steps", c.visual_steps);
        c.seed = j.value("seed", c.seed);
        c.eps_log = j.value("eps_log", c.eps_log);
        c.visual_enabled = j.value("visual_enabled", c.visual_enabled);
        c.mu_pull = j.value("mu_pull", c.mu_pull);
        c.visual_lr = j.value("visual_lr", c.visual_lr);
        c.visual_downsample = j.value("visual_downsample", c.visual_downsample);
        c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
        c.ssim_target = j.value("ssim_target", c.ssim_target);
        c.ssim_weight = j.value("ssim_weight", c.ssim_weight);
        if (j.contains("init_heads")) {
            c.init_heads = j["init_heads"].get<std::array<double, kHeadCount>>();
        }
        if (j.contains("mode")) {
            const auto m = j["mode"].get<std::string>();
            if (m != "adaptive" && m != "exact") throw ConfigError("mode must be adaptive|exact");
            c.mode = m == "exact" ? UpdateMode::exact : UpdateMode::adaptive;
        }
        if (j.contains("orientation")) {
            const auto o = j["orientation"].get<std::string>();
            if (o != "literal" && o != "corrective") throw ConfigError("orientation must be literal|corrective");
            c.orientation = o == "literal" ? Orientation::literal : Orientation::corrective;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed training config: ") + e.what());
    }
    c.validate();
    return c;
}

json TrainLogRecord::to_json() const
{
    return json{{"step", step},
                {"l_ds", l_ds},
                {"l_vi", l_vi},
                {"l_vc", l_vc},
                {"penalty", penalty},
                {"p_real", p_real},
                {"visual_loss", visual_loss},
                {"param_means",
                 {{"sigma_gn", param_means[0]},
                  {"mu_gn", param_means[1]},
                  {"sigma_gf", param_means[2]},
                  {"k_gf", param_means[3]},
                  {"sigma_bl", param_means[4]},
                  {"k_bl", param_means[5]}}}};
}

TrainLogRecord TrainLogRecord::from_json(const json& j)
{
    TrainLogRecord r;
    r.step = j.at("step");
    r.l_ds = j.at("l_ds");
    r.l_vi = j.at("l_vi");
    r.l_vc = j.at("l_vc");
    r.penalty = j.at("penalty");
    r.p_real = j.at("p_real");
    r.visual_loss = j.at("visual_loss");
    const json& m = j.at("param_means");
    r.param_means = {m.at("sigma_gn"), m.at("mu_gn"), m.at("sigma_gf"), m.at("k_gf"), m.at("sigma_bl"), m.at("k_bl")};
    return r;
}

double loss_ds(double p_real, double eps_log) { return std::log(std::clamp(p_real, eps_log, 1.0)); }

namespace {

double head(const std::array<double, kHeadCount>& h, Head which)
{
    return h[static_cast<std::size_t>(head_index(which))];
}

}  // namespace

double loss_vc(const std::array<double, kHeadCount>& h, double eps_log)
{
    auto lg = [eps_log](double v) { return std::log(std::max(v, eps_log)); };
    const double log_m_gf = lg(head(h, Head::SigmaGf)) + lg(head(h, Head::KGf));
    const double log_m_gn = lg(head(h, Head::SigmaGn));
    const double log_m_bl = lg(head(h, Head::SigmaBl)) + lg(head(h, Head::KBl));
    return log_m_gf + log_m_gn - log_m_bl;
}

std::array<double, kHeadCount> loss_vc_grad(const std::array<double, kHeadCount>& h, double eps_log)
{
    std::array<double, kHeadCount> g{};
    auto inv = [eps_log](double v) { return v > eps_log ? 1.0 / v : 0.0; };
    g[static_cast<std::size_t>(head_index(Head::SigmaGf))] = inv(head(h, Head::SigmaGf));
    g[static_cast<std::size_t>(head_index(Head::KGf))] = inv(head(h, Head::KGf));
    g[static_cast<std::size_t>(head_index(Head::SigmaGn))] = inv(head(h, Head::SigmaGn));
    g[static_cast<std::size_t>(head_index(Head::SigmaBl))] = -inv(head(h, Head::SigmaBl));
    g[static_cast<std::size_t>(head_index(Head::KBl))] = -inv(head(h, Head::KBl));
    return g;
}

double penalty(double l_ds, double l_vi, double lambda)
{
    return std::exp(nn::sigmoid(l_ds)) - lambda * std::exp(nn::sigmoid(l_vi));
}

void rl_update(std::span<double> theta, std::span<const double> grad_l_vc, double eta, double p)
{
    if (theta.size() != grad_l_vc.size()) {
        throw DomainError("rl_update: parameter and gradient sizes differ");
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
        theta[i] -= eta * p * grad_l_vc[i];
    }
}

double generator_visual_loss(double v_camouflaged, double eps_log)
{
    return -std::log(std::max(v_camouflaged, eps_log));
}

StepOutput generator_update_step(GeneratorModel& g, std::span<const FaceRecord* const> batch,
                                 const VisualDiscriminator* v, const DetectorHandle& d, const TrainConfig& cfg,
                                 nn::Optimizer& opt, std::uint64_t seed, int step)
{
    if (batch.empty()) {
        throw DomainError("generator step needs a non-empty batch");
    }
    std::vector<const ImageF*> images;
    for (const FaceRecord* r : batch) {
        images.push_back(&r->image);
    }
    const auto heads = g.heads(images);
    const std::size_t n = batch.size();

    StepOutput out;
    out.camouflaged.reserve(n);
    std::vector<CamouflageParams> params;
    for (std::size_t i = 0; i < n; ++i) {
        params.push_back(map_heads_to_ranges(heads[i], g.ranges()));
        out.camouflaged.push_back(camouflage(*batch[i], params.back(), mix_seed(seed, i)));
    }
    const auto p_real = d.predict(out.camouflaged);
    std::vector<double> v_out(n, 0.5);
    if (v != nullptr) {
        std::vector<const ImageF*> cam_ptrs;
        for (const ImageF& c : out.camouflaged) cam_ptrs.push_back(&c);
        v_out = v->predict(cam_ptrs);
    }

    const double mu_width = g.ranges().mu_gn.hi - g.ranges().mu_gn.lo;
    const double sign = cfg.orientation == Orientation::literal ? 1.0 : -1.0;
    std::vector<std::array<double, kHeadCount>> dheads(n);
    TrainLogRecord& rec = out.record;
    rec.step = step;
    for (std::size_t i = 0; i < n; ++i) {
        const double lds = loss_ds(p_real[i], cfg.eps_log);
        const double lvi = v != nullptr ? generator_visual_loss(v_out[i], cfg.eps_log) : 0.0;
        const double lvc = loss_vc(heads[i], cfg.eps_log);
        const double pen = v != nullptr ? penalty(lds, lvi, cfg.lambda) : std::exp(nn::sigmoid(lds));
        const auto grad = loss_vc_grad(heads[i], cfg.eps_log);
        for (int k = 0; k < kHeadCount; ++k) {
            dheads[i][static_cast<std::size_t>(k)] = sign * pen * grad[static_cast<std::size_t>(k)] / static_cast<double>(n);
        }
        dheads[i][static_cast<std::size_t>(head_index(Head::MuGn))] +=
            2.0 * cfg.mu_pull * params[i].mu_gn * mu_width / static_cast<double>(n);

        rec.l_ds += lds / static_cast<double>(n);
        rec.l_vi += lvi / static_cast<double>(n);
        rec.l_vc += lvc / static_cast<double>(n);
        rec.penalty += pen / static_cast<double>(n);
        rec.p_real += p_real[i] / static_cast<double>(n);
        const CamouflageParams& p = params[i];
        const double applied[kHeadCount] = {p.sigma_gn, p.mu_gn, p.sigma_gf, static_cast<double>(p.k_gf), p.sigma_bl,
                                            static_cast<double>(p.k_bl)};
        for (int k = 0; k < kHeadCount; ++k) {
            rec.param_means[static_cast<std::size_t>(k)] += applied[k] / static_cast<double>(n);
        }
    }
    const bool finite = std::isfinite(rec.l_ds) && std::isfinite(rec.l_vi) && std::isfinite(rec.l_vc) &&
                        std::isfinite(rec.penalty) &&
                        std::all_of(dheads.begin(), dheads.end(), [](const auto& a) {
                            return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
                        });
    if (!finite) {
        throw ModelStateError("non-finite value in generator step " + std::to_string(step) + ": " +
                              rec.to_json().dump());
    }

    g.net().zero_grad();
    g.backward_heads(dheads);
    opt.step(g.net().params());
    return out;
}

json Validation::to_json() const
{
    return json{{"step", step}, {"success", success}, {"ssim", ssim}, {"composite", composite}};
}

Validation validate_generator(GeneratorModel& g, std::span<const FaceRecord> val, const DetectorHandle& d,
                              const TrainConfig& cfg, int step)
{
    Validation v;
    v.step = step;
    if (val.empty()) {
        return v;
    }
    std::vector<ImageF> cam;
    double ssim_sum = 0.0;
    for (std::size_t i = 0; i < val.size(); ++i) {
        const auto p = generate_params(g, val[i].image);
        cam.push_back(camouflage(val[i], p, mix_seed(cfg.seed ^ 0x7a11da7eull, i)));
        ssim_sum += metrics::ssim(val[i].image, cam.back());
    }
    const auto pr = d.predict(cam);
    v.success = 1.0 - metrics::accuracy(pr, Label::real);
    v.ssim = ssim_sum / static_cast<double>(val.size());
    v.composite = v.success - cfg.ssim_weight * std::max(0.0, cfg.ssim_target - v.ssim);
    return v;
}

TrainResult train_camgan(std::span<const FaceRecord> train, std::span<const FaceRecord> val, const DetectorHandle& d,
                         const TrainConfig& cfg, double gate, const std::function<void(const TrainLogRecord&)>& on_step)
{
    cfg.validate();
    if (train.empty()) {
        throw PreconditionError("training split has no real faces");
    }
    if (val.empty()) {
        throw PreconditionError("validation slice is empty");
    }
    TrainResult res;
    res.detector_gate = evaluate_gate(d, make_holdout(val, mix_seed(cfg.seed, 0x6a7e)));
    if (res.detector_gate.balanced_accuracy < gate) {
        throw PreconditionError("detector '" + d.name() + "' fails the accuracy gate: balanced accuracy " +
                                std::to_string(res.detector_gate.balanced_accuracy) + " < " + std::to_string(gate) +
                                " (retrain it with train-detector)");
    }
    const std::uint64_t detector_hash = d.param_hash();

    GeneratorModel g(GeneratorModel::desk_backbone(), ParamRanges{}, mix_seed(cfg.seed, 0x6e));
    g.set_initial_heads(cfg.init_heads);
    VisualDiscriminator::Spec vspec;
    vspec.downsample = cfg.visual_downsample;
    VisualDiscriminator v(vspec, mix_seed(cfg.seed, 0x76), cfg.visual_lr);
    nn::Optimizer opt(cfg.mode == UpdateMode::exact ? nn::OptimizerKind::sgd : nn::OptimizerKind::rmsprop, cfg.eta);

    Validation best = validate_generator(g, val, d, cfg, 0);
    res.validations.push_back(best);
    std::vector<float> best_params = g.net().flat_params();

    Rng rng(mix_seed(cfg.seed, 0x5eed), 0x7);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();
    auto next_batch = [&]() {
        std::vector<const FaceRecord*> b;
        for (int k = 0; k < cfg.batch; ++k) {
            if (cursor == order.size()) {
                for (std::size_t i = order.size(); i > 1; --i) {
                    std::swap(order[i - 1], order[rng.below(i)]);
                }
                cursor = 0;
            }
            b.push_back(&train[order[cursor++]]);
        }
        return b;
    };

    for (int step = 1; step <= cfg.max_steps; ++step) {
        const auto batch = next_batch();
        const std::uint64_t step_seed = mix_seed(cfg.seed, 0x10000ull + static_cast<std::uint64_t>(step));
        StepOutput so = generator_update_step(g, batch, cfg.visual_enabled ? &v : nullptr, d, cfg, opt, step_seed, step);

        if (cfg.visual_enabled) {
            double vloss = 0.0;
            for (int k = 0; k < cfg.visual_steps; ++k) {
                const auto reals = next_batch();
                std::vector<ImageF> fakes;
                for (std::size_t i = 0; i < reals.size(); ++i) {
                    const Strength tier = rng.uniform() < 0.5 ? Strength::med : Strength::high;
                    fakes.push_back(make_pseudo_fake(*reals[i], tier, rng.next_u64()));
                }
                VisualBatch vb;
                for (const FaceRecord* r : reals) vb.real.push_back(&r->image);
                for (const ImageF& f : fakes) vb.fake.push_back(&f);
                for (const ImageF& c : so.camouflaged) vb.camouflaged.push_back(&c);
                vloss += train_visual_step(v, vb).total();
            }
            so.record.visual_loss = cfg.visual_steps > 0 ? vloss / cfg.visual_steps : 0.0;
        }
        res.log.push_back(so.record);
        if (on_step) {
            on_step(so.record);
        }

        if (step % cfg.checkpoint_every == 0 || step == cfg.max_steps) {
            const Validation val_now = validate_generator(g, val, d, cfg, step);
            res.validations.push_back(val_now);
            log::info("step " + std::to_string(step) + ": success " + std::to_string(val_now.success) + ", ssim " +
                      std::to_string(val_now.ssim) + ", p_real " + std::to_string(so.record.p_real));
            if (val_now.composite > best.composite) {
                best = val_now;
                best_params = g.net().flat_params();
            }
        }
    }

    if (d.param_hash() != detector_hash) {
        throw ModelStateError("detector parameters changed during training");
    }
    g.net().set_flat_params(best_params);
    res.generator = std::move(g);
    res.visual = std::move(v);
    res.selected_step = best.step;
    return res;
}

}  // namespace camo
