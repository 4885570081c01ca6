#include "camo/generator.hpp"

#include <algorithm>
#include <cmath>

#include "camo/checkpoint.hpp"
#include "camo/error.hpp"

namespace camo {

using nlohmann::json;

namespace {

void validate_kernel_set(const std::vector<int>& set, const char* name)
{
    if (set.empty()) {
        throw ConfigError(std::string("kernel set ") + name + " is empty");
    }
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (set[i] < 1 || set[i] % 2 == 0) {
            throw ConfigError(std::string("kernel set ") + name + " must hold positive odd sizes");
        }
        if (i > 0 && set[i] <= set[i - 1]) {
            throw ConfigError(std::string("kernel set ") + name + " must be strictly ascending");
        }
    }
}

void validate_interval(const Interval& iv, const char* name)
{
    if (!(iv.lo < iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi)) {
        throw ConfigError(std::string("range ") + name + " needs finite lo < hi");
    }
}

bool inside(const Interval& iv, double v) { return v >= iv.lo && v <= iv.hi; }

json interval_json(const Interval& iv) { return json::array({iv.lo, iv.hi}); }

Interval interval_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

double affine(const Interval& iv, double h) { return iv.lo + h * (iv.hi - iv.lo); }

}  // namespace

void ParamRanges::validate() const
{
    validate_interval(mu_gn, "mu_gn");
    validate_interval(sigma_gn, "sigma_gn");
    validate_interval(sigma_gf, "sigma_gf");
    validate_interval(sigma_bl, "sigma_bl");
    if (sigma_gn.lo < 0.0 || sigma_gf.lo <= 0.0 || sigma_bl.lo <= 0.0) {
        throw ConfigError("sigma ranges must be non-negative (filter sigmas strictly positive)");
    }
    validate_kernel_set(k_gf, "k_gf");
    validate_kernel_set(k_bl, "k_bl");
}

bool ParamRanges::contains(const CamouflageParams& p) const
{
    return inside(mu_gn, p.mu_gn) && inside(sigma_gn, p.sigma_gn) && inside(sigma_gf, p.sigma_gf) &&
           inside(sigma_bl, p.sigma_bl) && std::binary_search(k_gf.begin(), k_gf.end(), p.k_gf) &&
           std::binary_search(k_bl.begin(), k_bl.end(), p.k_bl);
}

json ParamRanges::to_json() const
{
    return json{{"mu_gn", interval_json(mu_gn)},       {"sigma_gn", interval_json(sigma_gn)},
                {"sigma_gf", interval_json(sigma_gf)}, {"sigma_bl", interval_json(sigma_bl)},
                {"k_gf", k_gf},                        {"k_bl", k_bl}};
}

ParamRanges ParamRanges::from_json(const json& j)
{
    ParamRanges r;
    try {
        if (j.contains("mu_gn")) r.mu_gn = interval_from(j["mu_gn"]);
        if (j.contains("sigma_gn")) r.sigma_gn = interval_from(j["sigma_gn"]);
        if (j.contains("sigma_gf")) r.sigma_gf = interval_from(j["sigma_gf"]);
        if (j.contains("sigma_bl")) r.sigma_bl = interval_from(j["sigma_bl"]);
        if (j.contains("k_gf")) r.k_gf = j["k_gf"].get<std::vector<int>>();
        if (j.contains("k_bl")) r.k_bl = j["k_bl"].get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed parameter ranges: ") + e.what());
    }
    r.validate();
    return r;
}

int quantize_kernel(double v, const std::vector<int>& allowed)
{
    if (allowed.empty()) {
        throw ConfigError("quantize_kernel: empty kernel set");
    }
    int best = allowed.front();
    double best_d = std::abs(v - best);
    for (int k : allowed) {
        const double d = std::abs(v - k);
        if (d < best_d) {  // strict: ties keep the smaller member
            best = k;
            best_d = d;
        }
    }
    return best;
}

CamouflageParams map_heads_to_ranges(const std::array<double, kHeadCount>& h, const ParamRanges& r)
{
    CamouflageParams p;
    p.continuous = h;
    p.sigma_gn = affine(r.sigma_gn, h[head_index(Head::SigmaGn)]);
    p.mu_gn = affine(r.mu_gn, h[head_index(Head::MuGn)]);
    p.sigma_gf = affine(r.sigma_gf, h[head_index(Head::SigmaGf)]);
    p.sigma_bl = affine(r.sigma_bl, h[head_index(Head::SigmaBl)]);
    const Interval kgf{static_cast<double>(r.k_gf.front()), static_cast<double>(r.k_gf.back())};
    const Interval kbl{static_cast<double>(r.k_bl.front()), static_cast<double>(r.k_bl.back())};
    p.k_gf = quantize_kernel(affine(kgf, h[head_index(Head::KGf)]), r.k_gf);
    p.k_bl = quantize_kernel(affine(kbl, h[head_index(Head::KBl)]), r.k_bl);
    return p;
}

GeneratorModel::GeneratorModel(nn::NetSpec backbone, ParamRanges ranges, std::uint64_t init_seed)
    : ranges_(std::move(ranges))
{
    ranges_.validate();
    backbone.outputs = kHeadCount;
    net_ = nn::ConvNet(std::move(backbone), init_seed);
    // Start every head at the middle of its range.
    for (auto& p : net_.params()) {
        if (p.name == "head.weight") {
            for (float& v : *p.value) {
                v *= 0.1f;
            }
        }
    }
}

void GeneratorModel::set_initial_heads(const std::array<double, kHeadCount>& heads)
{
    for (auto& p : net_.params()) {
        if (p.name != "head.bias") continue;
        for (int k = 0; k < kHeadCount; ++k) {
            const double h = std::clamp(heads[static_cast<std::size_t>(k)], 1e-4, 1.0 - 1e-4);
            (*p.value)[static_cast<std::size_t>(k)] = static_cast<float>(std::log(h / (1.0 - h)));
        }
    }
}

nn::NetSpec GeneratorModel::desk_backbone()
{
    nn::NetSpec s;
    s.channels = {16, 32, 64, 64};
    s.outputs = kHeadCount;
    return s;
}

std::vector<std::array<double, kHeadCount>> GeneratorModel::heads(std::span<const ImageF* const> images)
{
    const nn::Tensor logits = net_.forward(nn::to_batch(images));
    std::vector<std::array<double, kHeadCount>> out(static_cast<std::size_t>(logits.n));
    for (int i = 0; i < logits.n; ++i) {
        for (int j = 0; j < kHeadCount; ++j) {
            const double z = logits.at(i, j, 0, 0);
            if (!std::isfinite(z)) {
                throw ModelStateError("generator produced a non-finite head output");
            }
            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                std::clamp(nn::sigmoid(z), kHeadFloor, 1.0 - kHeadFloor);
        }
    }
    last_heads_ = out;
    return out;
}

std::array<double, kHeadCount> GeneratorModel::heads(const ImageF& image)
{
    const ImageF* p = &image;
    return heads(std::span<const ImageF* const>(&p, 1)).front();
}

void GeneratorModel::backward_heads(std::span<const std::array<double, kHeadCount>> dheads)
{
    if (dheads.size() != last_heads_.size()) {
        throw DomainError("backward_heads: batch size differs from the last forward pass");
    }
    std::vector<float> dlogits(dheads.size() * kHeadCount);
    for (std::size_t i = 0; i < dheads.size(); ++i) {
        for (int j = 0; j < kHeadCount; ++j) {
            const double h = last_heads_[i][static_cast<std::size_t>(j)];
            dlogits[i * kHeadCount + static_cast<std::size_t>(j)] =
                static_cast<float>(dheads[i][static_cast<std::size_t>(j)] * h * (1.0 - h));
        }
    }
    net_.backward(dlogits);
}

void GeneratorModel::save(const std::filesystem::path& path) const
{
    Checkpoint ck;
    ck.kind = "generator";
    ck.backbone_id = net_.spec().id();
    ck.metadata = json{{"ranges", ranges_.to_json()}};
    ck.params = net_.flat_params();
    save_checkpoint(path, ck);
}

GeneratorModel GeneratorModel::load(const std::filesystem::path& path)
{
    const Checkpoint ck = load_checkpoint(path);
    if (!ck.metadata.contains("ranges")) {
        throw ModelStateError("generator checkpoint lacks embedded ranges: " + path.string());
    }
    GeneratorModel g;
    g.ranges_ = ParamRanges::from_json(ck.metadata["ranges"]);
    g.net_ = network_from_checkpoint(ck, "generator");
    if (g.net_.spec().outputs != kHeadCount) {
        throw ModelStateError("generator checkpoint does not have six heads");
    }
    return g;
}

GeneratorModel GeneratorModel::load(const std::filesystem::path& path, const ParamRanges& expected_ranges,
                                    const nn::NetSpec* expected_backbone)
{
    GeneratorModel g = load(path);
    if (!(g.ranges_ == expected_ranges)) {
        throw ModelStateError("generator checkpoint ranges differ from the configured ranges: " +
                              path.string());
    }
    if (expected_backbone != nullptr && !(g.net_.spec() == *expected_backbone)) {
        throw ModelStateError("generator checkpoint backbone '" + g.net_.spec().id() +
                              "' differs from configured '" + expected_backbone->id() + "'");
    }
    return g;
}

CamouflageParams generate_params(GeneratorModel& model, const ImageF& image)
{
    return map_heads_to_ranges(model.heads(image), model.ranges());
}

json params_to_json(const CamouflageParams& p)
{
    return json{{"mu_gn", p.mu_gn},       {"sigma_gn", p.sigma_gn}, {"k_gf", p.k_gf},
                {"sigma_gf", p.sigma_gf}, {"k_bl", p.k_bl},         {"sigma_bl", p.sigma_bl},
                {"heads", p.continuous}};
}

}  // namespace camo
