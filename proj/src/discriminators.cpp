#include "camo/discriminators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "camo/checkpoint.hpp"
#include "camo/error.hpp"
#include "camo/image_io.hpp"
#include "camo/log.hpp"
#include "camo/random.hpp"

namespace camo {

using nlohmann::json;

namespace {

constexpr double kProbFloor = 1e-6;

std::vector<const ImageF*> pointers(std::span<const ImageF> images)
{
    std::vector<const ImageF*> out;
    out.reserve(images.size());
    for (const ImageF& img : images) {
        out.push_back(&img);
    }
    return out;
}

ImageF flip_horizontal(const ImageF& img)
{
    ImageF out(img.height(), img.width());
    const int w = img.width();
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = img.at(y, w - 1 - x, c);
            }
        }
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------- detector

DetectorHandle::DetectorHandle(nn::ConvNet net, std::string name, json provenance, int input_size)
    : net_(std::move(net)), name_(std::move(name)), provenance_(std::move(provenance)), input_size_(input_size)
{
    if (net_.spec().outputs != 1) {
        throw ModelStateError("a detector network has exactly one output");
    }
    if (input_size_ <= 0) {
        throw ConfigError("detector input size must be positive");
    }
}

DetectorHandle DetectorHandle::load(const std::filesystem::path& path)
{
    const Checkpoint ck = load_checkpoint(path);
    nn::ConvNet net = network_from_checkpoint(ck, "detector");
    const json& m = ck.metadata;
    if (!m.contains("input_size")) {
        throw ModelStateError("detector checkpoint lacks its input size: " + path.string());
    }
    DetectorHandle d(std::move(net), m.value("name", path.stem().string()), m.value("provenance", json::object()),
                     m["input_size"].get<int>());
    d.gradients_ = m.value("gradients", true);
    return d;
}

void DetectorHandle::save(const std::filesystem::path& path) const
{
    Checkpoint ck;
    ck.kind = "detector";
    ck.backbone_id = net_.spec().id();
    ck.metadata = json{{"name", name_},
                       {"provenance", provenance_},
                       {"input_size", input_size_},
                       {"gradients", gradients_}};
    ck.params = net_.flat_params();
    save_checkpoint(path, ck);
}

void DetectorHandle::check_input(const ImageF& img) const
{
    if (!loaded()) {
        throw ModelStateError("detector handle is empty");
    }
    if (img.height() != input_size_ || img.width() != input_size_) {
        throw DomainError("detector '" + name_ + "' expects " + std::to_string(input_size_) + "x" +
                          std::to_string(input_size_) + " input, got " + std::to_string(img.height()) + "x" +
                          std::to_string(img.width()));
    }
}

double DetectorHandle::predict(const ImageF& img) const
{
    return predict(std::span<const ImageF>(&img, 1)).front();
}

std::vector<double> DetectorHandle::predict(std::span<const ImageF> images) const
{
    std::vector<double> out;
    out.reserve(images.size());
    constexpr std::size_t kChunk = 32;
    nn::ConvNet scratch = net_;
    for (std::size_t off = 0; off < images.size(); off += kChunk) {
        const auto part = images.subspan(off, std::min(kChunk, images.size() - off));
        for (const ImageF& img : part) {
            check_input(img);
        }
        const auto ptrs = pointers(part);
        const nn::Tensor logits = scratch.forward(nn::to_batch(ptrs));
        for (int i = 0; i < logits.n; ++i) {
            const double z = logits.at(i, 0, 0, 0);
            if (!std::isfinite(z)) {
                throw ModelStateError("detector produced a non-finite output");
            }
            out.push_back(nn::sigmoid(z));
        }
    }
    return out;
}

std::vector<std::vector<double>> DetectorHandle::features(std::span<const ImageF> images) const
{
    std::vector<std::vector<double>> out;
    constexpr std::size_t kChunk = 32;
    nn::ConvNet scratch = net_;
    for (std::size_t off = 0; off < images.size(); off += kChunk) {
        const auto part = images.subspan(off, std::min(kChunk, images.size() - off));
        for (const ImageF& img : part) {
            check_input(img);
        }
        scratch.forward(nn::to_batch(pointers(part)));
        const auto& pooled = scratch.features();
        const std::size_t dim = pooled.size() / part.size();
        for (std::size_t i = 0; i < part.size(); ++i) {
            out.emplace_back(pooled.begin() + static_cast<std::ptrdiff_t>(i * dim),
                             pooled.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
        }
    }
    return out;
}

DetectorProbe DetectorHandle::probe(const ImageF& img, double sign) const
{
    if (!gradients_) {
        throw CapabilityError("detector '" + name_ + "' does not expose gradients");
    }
    check_input(img);
    nn::ConvNet scratch = net_;
    const nn::Tensor logits = scratch.forward(nn::to_batch(img));
    DetectorProbe pr;
    pr.logit = logits.at(0, 0, 0, 0);
    pr.p_real = nn::sigmoid(pr.logit);
    pr.last_conv = scratch.last_conv();
    const float g = static_cast<float>(sign);
    const nn::Tensor dx = scratch.backward(std::span<const float>(&g, 1), true);
    pr.last_conv_grad = scratch.last_conv_grad();
    pr.input_grad = ImageF(img.height(), img.width());
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < img.height(); ++y) {
            for (int x = 0; x < img.width(); ++x) {
                pr.input_grad.at(y, x, c) = static_cast<double>(dx.at(0, c, y, x)) * nn::kInputScale;
            }
        }
    }
    return pr;
}

// ---------------------------------------------------- visual discriminator

ImageF downsample_box(const ImageF& img, int factor)
{
    if (factor < 1 || img.height() % factor != 0 || img.width() % factor != 0) {
        throw DomainError("downsample factor must divide the image size");
    }
    if (factor == 1) {
        return img;
    }
    const int h = img.height() / factor;
    const int w = img.width() / factor;
    ImageF out(h, w);
    const double inv = 1.0 / (factor * factor);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double s = 0.0;
                for (int dy = 0; dy < factor; ++dy) {
                    for (int dx = 0; dx < factor; ++dx) {
                        s += img.at(y * factor + dy, x * factor + dx, c);
                    }
                }
                out.at(y, x, c) = s * inv;
            }
        }
    }
    return out;
}

VisualDiscriminator::VisualDiscriminator(Spec spec, std::uint64_t init_seed, double lr)
    : spec_(std::move(spec)), opt_(nn::OptimizerKind::rmsprop, lr)
{
    if (spec_.downsample < 1) {
        throw ConfigError("visual discriminator downsample factor must be >= 1");
    }
    spec_.net.outputs = 1;
    net_ = nn::ConvNet(spec_.net, init_seed);
}

namespace {

nn::Tensor visual_input(std::span<const ImageF* const> images, int factor)
{
    std::vector<ImageF> small;
    small.reserve(images.size());
    for (const ImageF* img : images) {
        small.push_back(downsample_box(*img, factor));
    }
    return nn::to_batch(pointers(small));
}

}  // namespace

double VisualDiscriminator::predict(const ImageF& img) const
{
    const ImageF* p = &img;
    return predict(std::span<const ImageF* const>(&p, 1)).front();
}

std::vector<double> VisualDiscriminator::predict(std::span<const ImageF* const> images) const
{
    nn::ConvNet scratch = net_;
    const nn::Tensor logits = scratch.forward(visual_input(images, spec_.downsample));
    std::vector<double> out;
    for (int i = 0; i < logits.n; ++i) {
        const double z = logits.at(i, 0, 0, 0);
        if (!std::isfinite(z)) {
            throw ModelStateError("visual discriminator produced a non-finite output");
        }
        out.push_back(nn::sigmoid(z));
    }
    return out;
}

void VisualDiscriminator::save(const std::filesystem::path& path) const
{
    Checkpoint ck;
    ck.kind = "visual";
    ck.backbone_id = net_.spec().id();
    ck.metadata = json{{"downsample", spec_.downsample}};
    ck.params = net_.flat_params();
    save_checkpoint(path, ck);
}

VisualDiscriminator VisualDiscriminator::load(const std::filesystem::path& path, double lr)
{
    const Checkpoint ck = load_checkpoint(path);
    VisualDiscriminator v;
    v.net_ = network_from_checkpoint(ck, "visual");
    v.spec_.net = v.net_.spec();
    v.spec_.downsample = ck.metadata.value("downsample", 1);
    v.opt_ = nn::Optimizer(nn::OptimizerKind::rmsprop, lr);
    return v;
}

VisualLoss visual_loss(double v_real, double v_fake, double v_camouflaged, double eps)
{
    VisualLoss l;
    l.real = -std::log(std::max(v_real, eps));
    l.fake = -std::log(std::max(1.0 - v_fake, eps));
    l.camouflaged = -std::log(std::max(1.0 - v_camouflaged, eps));
    return l;
}

VisualLoss train_visual_step(VisualDiscriminator& v, const VisualBatch& batch)
{
    if (batch.real.empty() || batch.fake.empty() || batch.camouflaged.empty()) {
        throw DomainError("visual discriminator step needs real, fake and camouflaged images");
    }
    std::vector<const ImageF*> all;
    std::vector<float> target;
    std::vector<double> weight;
    auto add = [&](const std::vector<const ImageF*>& role, float t) {
        for (const ImageF* img : role) {
            all.push_back(img);
            target.push_back(t);
            weight.push_back(1.0 / static_cast<double>(role.size()));
        }
    };
    add(batch.real, 1.0f);
    add(batch.fake, 0.0f);
    add(batch.camouflaged, 0.0f);

    nn::ConvNet& net = v.net();
    const nn::Tensor logits = net.forward(visual_input(all, v.spec().downsample));
    VisualLoss loss;
    std::vector<float> dlogits(all.size());
    const std::size_t nr = batch.real.size();
    const std::size_t nf = batch.fake.size();
    for (std::size_t i = 0; i < all.size(); ++i) {
        const double z = logits.at(static_cast<int>(i), 0, 0, 0);
        if (!std::isfinite(z)) {
            throw ModelStateError("visual discriminator produced a non-finite output");
        }
        const double p = nn::sigmoid(z);
        const double w = weight[i];
        // log-sigmoid keeps saturated terms exact; the floor matches visual_loss.
        const double nll = target[i] > 0.5f ? -std::max(nn::log_sigmoid(z), std::log(kProbFloor))
                                            : -std::max(nn::log_sigmoid(-z), std::log(kProbFloor));
        if (i < nr) {
            loss.real += w * nll;
        } else if (i < nr + nf) {
            loss.fake += w * nll;
        } else {
            loss.camouflaged += w * nll;
        }
        dlogits[i] = static_cast<float>(w * (p - target[i]));
    }
    net.zero_grad();
    net.backward(dlogits);
    v.optimizer().step(net.params());
    return loss;
}

// ------------------------------------------------------------ pseudo-fakes

Strength parse_strength(const std::string& s)
{
    if (s == "low") return Strength::low;
    if (s == "med") return Strength::med;
    if (s == "high") return Strength::high;
    throw ConfigError("unknown pseudo-fake strength '" + s + "' (low|med|high)");
}

std::string to_string(Strength s)
{
    switch (s) {
    case Strength::low: return "low";
    case Strength::med: return "med";
    case Strength::high: return "high";
    }
    return "?";
}

CamouflageParams pseudo_fake_params(Strength strength)
{
    CamouflageParams p;
    switch (strength) {
    case Strength::low:
        p.sigma_gn = 0.003;
        p.k_gf = 1;
        p.sigma_gf = 1.0;
        p.k_bl = 15;
        p.sigma_bl = 5.0;
        break;
    case Strength::med:
        p.sigma_gn = 0.025;
        p.k_gf = 5;
        p.sigma_gf = 1.0;
        p.k_bl = 9;
        p.sigma_bl = 3.0;
        break;
    case Strength::high:
        p.sigma_gn = 0.08;
        p.k_gf = 7;
        p.sigma_gf = 2.5;
        p.k_bl = 5;
        p.sigma_bl = 1.0;
        break;
    }
    return p;
}

ImageF make_pseudo_fake(const FaceRecord& record, Strength strength, std::uint64_t seed)
{
    return camouflage(record, pseudo_fake_params(strength), seed);
}

ImageF augment(const ImageF& img, std::uint64_t seed)
{
    Rng rng(seed, 0xa6);
    ImageF out = rng.uniform() < 0.5 ? flip_horizontal(img) : img;
    const double u = rng.uniform();
    if (u < 0.25) {
        out = io::jpeg_roundtrip(out, 70 + static_cast<int>(rng.below(26)));
    } else if (u < 0.40) {
        out = gaussian_filter(out, 5, rng.uniform(0.3, 0.7));
    } else if (u < 0.55) {
        out = add_gaussian_noise(out, 0.0, rng.uniform(0.0, 0.012), rng.next_u64());
    }
    return out;
}

// ---------------------------------------------------------- desk detector

json DetectorTrainConfig::to_json() const
{
    return json{{"max_epochs", max_epochs}, {"min_epochs", min_epochs}, {"batch", batch},
                {"lr", lr},                 {"gate", gate},             {"seed", seed},
                {"augment", augment},       {"backbone", backbone.id()}, {"name", name}};
}

DetectorTrainConfig DetectorTrainConfig::from_json(const json& j)
{
    DetectorTrainConfig c;
    if (!j.is_object()) {
        throw ConfigError("detector config must be a JSON object");
    }
    static const std::string known[] = {"max_epochs", "min_epochs", "batch", "lr",      "gate",
                                        "seed",       "augment",    "name",  "backbone"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw ConfigError("unknown detector config key '" + key + "'");
        }
    }
    try {
        c.max_epochs = j.value("max_epochs", c.max_epochs);
        c.min_epochs = j.value("min_epochs", c.min_epochs);
        c.batch = j.value("batch", c.batch);
        c.lr = j.value("lr", c.lr);
        c.gate = j.value("gate", c.gate);
        c.seed = j.value("seed", c.seed);
        c.augment = j.value("augment", c.augment);
        c.name = j.value("name", c.name);
        if (j.contains("backbone")) {
            c.backbone = nn::parse_net_id(j["backbone"].get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed detector config: ") + e.what());
    } catch (const ModelStateError& e) {
        throw ConfigError(e.what());
    }
    if (c.max_epochs < 1 || c.batch < 1 || !(c.lr > 0.0) || c.min_epochs < 0) {
        throw ConfigError("detector config needs max_epochs >= 1, batch >= 1, lr > 0");
    }
    return c;
}

HoldoutSet make_holdout(std::span<const FaceRecord> reals, std::uint64_t seed)
{
    HoldoutSet h;
    h.reals.reserve(reals.size());
    h.fakes.reserve(reals.size());
    for (std::size_t i = 0; i < reals.size(); ++i) {
        h.reals.push_back(reals[i].image);
        const Strength s = i % 2 == 0 ? Strength::med : Strength::high;
        h.fakes.push_back(make_pseudo_fake(reals[i], s, mix_seed(seed, 0x40000 + i)));
    }
    return h;
}

GateResult evaluate_gate(const DetectorHandle& d, const HoldoutSet& holdout)
{
    const auto pr = d.predict(holdout.reals);
    const auto pf = d.predict(holdout.fakes);
    GateResult g;
    const auto real_ok = std::count_if(pr.begin(), pr.end(), [](double p) { return p >= 0.5; });
    const auto fake_ok = std::count_if(pf.begin(), pf.end(), [](double p) { return p < 0.5; });
    g.tpr_real = pr.empty() ? 0.0 : static_cast<double>(real_ok) / static_cast<double>(pr.size());
    g.tnr_fake = pf.empty() ? 0.0 : static_cast<double>(fake_ok) / static_cast<double>(pf.size());
    g.balanced_accuracy = 0.5 * (g.tpr_real + g.tnr_fake);
    return g;
}

DetectorTrainResult train_desk_detector(std::vector<FaceRecord> train, std::vector<FaceRecord> holdout,
                                        const DetectorTrainConfig& cfg)
{
    if (train.size() < 200) {
        throw PreconditionError("detector training needs at least 200 train reals, got " +
                                std::to_string(train.size()));
    }
    if (holdout.size() < 50) {
        throw PreconditionError("detector gate needs at least 50 held-out reals, got " +
                                std::to_string(holdout.size()));
    }
    const int size = train.front().image.height();
    for (const auto& r : train) {
        if (r.image.height() != size || r.image.width() != size) {
            throw DomainError("detector training images must share one square size");
        }
    }

    nn::NetSpec spec = cfg.backbone;
    spec.outputs = 1;
    nn::ConvNet net(spec, mix_seed(cfg.seed, 1));
    nn::Optimizer opt(nn::OptimizerKind::adam, cfg.lr, 0.999, 1e-8);
    const HoldoutSet gate_set = make_holdout(holdout, mix_seed(cfg.seed, 2));

    Rng rng(mix_seed(cfg.seed, 3), 0xde);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    DetectorTrainResult res;
    res.holdout_images = gate_set.reals.size() + gate_set.fakes.size();
    std::vector<float> best_params;
    GateResult best;
    best.balanced_accuracy = -1.0;
    const json provenance = {{"trainer", "desk pseudo-fake"}, {"config", cfg.to_json()},
                             {"train_reals", train.size()}};

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t n = std::min(static_cast<std::size_t>(cfg.batch), order.size() - off);
            std::vector<ImageF> imgs;
            std::vector<float> target;
            imgs.reserve(2 * n);
            for (std::size_t k = 0; k < n; ++k) {
                const FaceRecord& r = train[order[off + k]];
                const std::uint64_t s1 = rng.next_u64();
                const std::uint64_t s2 = rng.next_u64();
                const Strength tier = rng.uniform() < 0.5 ? Strength::med : Strength::high;
                ImageF fake = make_pseudo_fake(r, tier, s1);
                imgs.push_back(cfg.augment ? augment(r.image, s2) : r.image);
                target.push_back(1.0f);
                imgs.push_back(cfg.augment ? augment(fake, s2 ^ 0x9e3779b97f4a7c15ull) : std::move(fake));
                target.push_back(0.0f);
            }
            const nn::Tensor logits = net.forward(nn::to_batch(pointers(imgs)));
            std::vector<float> dlogits(imgs.size());
            for (std::size_t k = 0; k < imgs.size(); ++k) {
                const double z = logits.at(static_cast<int>(k), 0, 0, 0);
                if (!std::isfinite(z)) {
                    throw ModelStateError("detector training diverged (non-finite logit) at epoch " +
                                          std::to_string(epoch));
                }
                epoch_loss += target[k] > 0.5f ? -nn::log_sigmoid(z) : -nn::log_sigmoid(-z);
                dlogits[k] = static_cast<float>((nn::sigmoid(z) - target[k]) / static_cast<double>(imgs.size()));
            }
            seen += imgs.size();
            net.zero_grad();
            net.backward(dlogits);
            opt.step(net.params());
        }

        const DetectorHandle snapshot(net, cfg.name, provenance, size);
        const GateResult g = evaluate_gate(snapshot, gate_set);
        res.history.push_back({{"epoch", epoch},
                               {"train_loss", epoch_loss / static_cast<double>(seen)},
                               {"balanced_accuracy", g.balanced_accuracy},
                               {"tpr_real", g.tpr_real},
                               {"tnr_fake", g.tnr_fake}});
        log::info("detector epoch " + std::to_string(epoch) + ": loss " +
                  std::to_string(epoch_loss / static_cast<double>(seen)) + ", balanced accuracy " +
                  std::to_string(g.balanced_accuracy));
        res.epochs = epoch;
        if (g.balanced_accuracy > best.balanced_accuracy) {
            best = g;
            best_params = net.flat_params();
        }
        if (epoch >= cfg.min_epochs && best.balanced_accuracy >= cfg.gate) {
            break;
        }
    }

    if (best.balanced_accuracy < cfg.gate) {
        std::string diag = "detector did not reach the balanced-accuracy gate " + std::to_string(cfg.gate) +
                           " within " + std::to_string(cfg.max_epochs) + " epochs; best " +
                           std::to_string(best.balanced_accuracy) + " (real " + std::to_string(best.tpr_real) +
                           ", pseudo-fake " + std::to_string(best.tnr_fake) + ")";
        throw PreconditionError(diag);
    }
    net.set_flat_params(best_params);
    json prov = provenance;
    prov["balanced_accuracy"] = best.balanced_accuracy;
    prov["epochs"] = res.epochs;
    res.detector = DetectorHandle(std::move(net), cfg.name, prov, size);
    res.balanced_accuracy = best.balanced_accuracy;
    res.tpr_real = best.tpr_real;
    res.tnr_fake = best.tnr_fake;
    return res;
}

DetectorTrainResult train_desk_detector(const DatasetManifest& manifest, const DetectorTrainConfig& cfg, int size)
{
    auto train = load_records(manifest, Split::train, Label::real, size);
    auto test = load_records(manifest, Split::test, Label::real, size);
    if (train.size() < 200) {
        throw PreconditionError("detector training needs at least 200 train reals, manifest has " +
                                std::to_string(train.size()));
    }
    if (test.size() < 50) {
        const std::size_t take = std::max<std::size_t>(50, train.size() / 5);
        if (train.size() - take < 200) {
            throw PreconditionError("manifest too small to hold out a gate slice from the train split");
        }
        test.assign(std::make_move_iterator(train.end() - static_cast<std::ptrdiff_t>(take)),
                    std::make_move_iterator(train.end()));
        train.resize(train.size() - take);
    }
    return train_desk_detector(std::move(train), std::move(test), cfg);
}

}  // namespace camo
