#include "camo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>

#include "camo/error.hpp"
#include "camo/image_io.hpp"
#include "camo/kernels.hpp"
#include "camo/log.hpp"

namespace camo::metrics {

using nlohmann::json;

Label decide(double p_real) noexcept { return p_real >= 0.5 ? Label::real : Label::fake; }

double accuracy(std::span<const double> p_real, Label label)
{
    if (p_real.empty()) {
        throw DomainError("accuracy of an empty set is undefined");
    }
    const auto hits = std::count_if(p_real.begin(), p_real.end(), [&](double p) { return decide(p) == label; });
    return static_cast<double>(hits) / static_cast<double>(p_real.size());
}

double accuracy(const DetectorHandle& d, std::span<const ImageF> images, Label label)
{
    if (images.empty()) {
        throw DomainError("accuracy of an empty set is undefined");
    }
    const auto p = d.predict(images);
    return accuracy(p, label);
}

// ------------------------------------------------------------------ SSIM

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

// Valid-mode separable correlation of a single plane.
Plane filter_valid(const Plane& src, std::span<const double> taps)
{
    const int k = static_cast<int>(taps.size());
    const int h = src.height();
    const int w = src.width();
    const int ho = h - k + 1;
    const int wo = w - k + 1;
    Plane tmp(h, wo);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < wo; ++x) {
            double s = 0.0;
            for (int t = 0; t < k; ++t) {
                s += taps[static_cast<std::size_t>(t)] * src.at(y, x + t);
            }
            tmp.at(y, x) = s;
        }
    }
    Plane out(ho, wo);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < ho; ++y) {
        for (int x = 0; x < wo; ++x) {
            double s = 0.0;
            for (int t = 0; t < k; ++t) {
                s += taps[static_cast<std::size_t>(t)] * tmp.at(y + t, x);
            }
            out.at(y, x) = s;
        }
    }
    return out;
}

Plane product(const Plane& a, const Plane& b)
{
    Plane out(a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.values()[i] = a.values()[i] * b.values()[i];
    }
    return out;
}

void check_same_shape(const ImageF& a, const ImageF& b, const char* what)
{
    if (!a.same_shape(b)) {
        throw DomainError(std::string(what) + ": images differ in shape");
    }
}

}  // namespace

double ssim(const ImageF& a, const ImageF& b)
{
    check_same_shape(a, b, "ssim");
    if (a.height() < kSsimWindow || a.width() < kSsimWindow) {
        throw DomainError("ssim needs images of at least 11x11");
    }
    const Plane la = luma_255(a);
    const Plane lb = luma_255(b);
    const auto taps = kernels::gaussian_taps(kSsimWindow, kSsimSigma);
    const Plane mu_a = filter_valid(la, taps);
    const Plane mu_b = filter_valid(lb, taps);
    const Plane e_aa = filter_valid(product(la, la), taps);
    const Plane e_bb = filter_valid(product(lb, lb), taps);
    const Plane e_ab = filter_valid(product(la, lb), taps);
    const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
    double total = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a.values()[i];
        const double mb = mu_b.values()[i];
        const double va = e_aa.values()[i] - ma * ma;
        const double vb = e_bb.values()[i] - mb * mb;
        const double cov = e_ab.values()[i] - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return total / static_cast<double>(mu_a.size());
}

double psnr(const ImageF& a, const ImageF& b)
{
    check_same_shape(a, b, "psnr");
    double se = 0.0;
    const auto va = a.values();
    const auto vb = b.values();
    for (std::size_t i = 0; i < va.size(); ++i) {
        const double d = (va[i] - vb[i]) * 255.0;
        se += d * d;
    }
    if (se == 0.0) {
        return kInfinity;
    }
    const double mse = se / static_cast<double>(va.size());
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

json psnr_json(double db)
{
    if (std::isinf(db)) {
        return "inf";
    }
    return db;
}

// ------------------------------------------------------------------- FID

double frechet_distance(std::span<const double> mu_a, std::span<const double> cov_a, std::span<const double> mu_b,
                        std::span<const double> cov_b, int d)
{
    using Mat = Eigen::MatrixXd;
    using Vec = Eigen::VectorXd;
    const Eigen::Map<const Vec> ma(mu_a.data(), d);
    const Eigen::Map<const Vec> mb(mu_b.data(), d);
    Mat ca = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(cov_a.data(), d, d);
    Mat cb = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(cov_b.data(), d, d);

    auto regularize = [d](Mat& c, const char* which) {
        Eigen::SelfAdjointEigenSolver<Mat> es(c, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() <= 1e-12) {
            log::warn(std::string("fid: singular covariance of set ") + which + ", adding 1e-6 I");
            c += 1e-6 * Mat::Identity(d, d);
        }
    };
    regularize(ca, "A");
    regularize(cb, "B");

    // Tr sqrt(Ca Cb) = Tr sqrt(Ca^1/2 Cb Ca^1/2), the latter symmetric PSD.
    Eigen::SelfAdjointEigenSolver<Mat> ea(ca);
    const Vec sa = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Mat root_a = ea.eigenvectors() * sa.asDiagonal() * ea.eigenvectors().transpose();
    const Mat m = root_a * cb * root_a;
    Eigen::SelfAdjointEigenSolver<Mat> em(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    const double tr_sqrt = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    const double dist = (ma - mb).squaredNorm() + ca.trace() + cb.trace() - 2.0 * tr_sqrt;
    return std::max(dist, 0.0);
}

namespace {

void gaussian_fit(const std::vector<std::vector<double>>& x, std::vector<double>& mu, std::vector<double>& cov)
{
    const std::size_t n = x.size();
    const std::size_t d = x.front().size();
    mu.assign(d, 0.0);
    for (const auto& row : x) {
        if (row.size() != d) {
            throw DomainError("fid: feature rows differ in length");
        }
        for (std::size_t j = 0; j < d; ++j) mu[j] += row[j];
    }
    for (double& v : mu) v /= static_cast<double>(n);
    cov.assign(d * d, 0.0);
    for (const auto& row : x) {
        for (std::size_t i = 0; i < d; ++i) {
            const double di = row[i] - mu[i];
            for (std::size_t j = 0; j < d; ++j) {
                cov[i * d + j] += di * (row[j] - mu[j]);
            }
        }
    }
    for (double& v : cov) v /= static_cast<double>(n - 1);
}

}  // namespace

double frechet_distance(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b)
{
    if (a.size() < 2 || b.size() < 2) {
        throw DomainError("fid needs at least two samples per set");
    }
    const std::size_t d = a.front().size();
    if (b.front().size() != d) {
        throw DomainError("fid: feature dimensions differ");
    }
    if (a.size() < 2 * d || b.size() < 2 * d) {
        log::warn("fid: fewer than 2x feature-dimension samples (" + std::to_string(std::min(a.size(), b.size())) +
                  " for d=" + std::to_string(d) + "); estimate is noisy");
    }
    std::vector<double> mu_a, cov_a, mu_b, cov_b;
    gaussian_fit(a, mu_a, cov_a);
    gaussian_fit(b, mu_b, cov_b);
    return frechet_distance(mu_a, cov_a, mu_b, cov_b, static_cast<int>(d));
}

double fid(const DetectorHandle& d, std::span<const ImageF> a, std::span<const ImageF> b)
{
    return frechet_distance(d.features(a), d.features(b));
}

// ------------------------------------------------------------ robustness

std::string to_string(PostProcess p)
{
    switch (p) {
    case PostProcess::none: return "none";
    case PostProcess::jpeg75: return "jpeg75";
    case PostProcess::gaussian_filter: return "gf_s0.5_k5";
    case PostProcess::gaussian_noise: return "gn_s0.01_m0";
    }
    return "?";
}

ImageF apply_postprocess(const ImageF& img, PostProcess p, std::uint64_t seed)
{
    switch (p) {
    case PostProcess::none: return img;
    case PostProcess::jpeg75: return io::jpeg_roundtrip(img, 75);
    case PostProcess::gaussian_filter: return gaussian_filter(img, 5, 0.5);
    case PostProcess::gaussian_noise: return add_gaussian_noise(img, 0.0, 0.01, seed);
    }
    return img;
}

json Verdict::to_json() const
{
    return json{{"image", image},           {"detector", detector}, {"attack", attack},
                {"postprocess", postprocess}, {"p_real", p_real},     {"predicted", predicted}};
}

std::vector<AccuracyRow> robustness_suite(std::span<const ImageF> images, std::span<const std::string> ids,
                                          const DetectorHandle& d, const std::string& attack, std::uint64_t seed,
                                          std::vector<Verdict>* verdicts)
{
    if (images.empty()) {
        throw DomainError("robustness suite needs at least one image");
    }
    if (!ids.empty() && ids.size() != images.size()) {
        throw DomainError("robustness suite: one id per image required");
    }
    std::vector<AccuracyRow> rows;
    for (PostProcess pp : kPostProcesses) {
        std::vector<ImageF> processed;
        processed.reserve(images.size());
        for (std::size_t i = 0; i < images.size(); ++i) {
            processed.push_back(apply_postprocess(images[i], pp, mix_seed(seed, i)));
        }
        const auto p = d.predict(processed);
        AccuracyRow row{d.name(), attack, to_string(pp), accuracy(p, Label::real), p.size()};
        rows.push_back(row);
        if (verdicts != nullptr) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                verdicts->push_back({ids.empty() ? std::to_string(i) : ids[i], d.name(), attack, row.postprocess, p[i],
                                     to_string(decide(p[i]))});
            }
        }
    }
    return rows;
}

// -------------------------------------------------------------- Grad-CAM

Plane grad_cam(const DetectorHandle& d, const ImageF& img, Label target)
{
    const DetectorProbe pr = d.probe(img, target == Label::real ? 1.0 : -1.0);
    const nn::Tensor& a = pr.last_conv;
    const nn::Tensor& g = pr.last_conv_grad;
    const int hw = a.h * a.w;
    Plane cam(a.h, a.w);
    for (int c = 0; c < a.c; ++c) {
        double alpha = 0.0;
        for (int k = 0; k < hw; ++k) {
            alpha += g.data[static_cast<std::size_t>(c) * hw + k];
        }
        alpha /= hw;
        for (int y = 0; y < a.h; ++y) {
            for (int x = 0; x < a.w; ++x) {
                cam.at(y, x) += alpha * a.at(0, c, y, x);
            }
        }
    }
    for (double& v : cam.values()) {
        v = std::max(v, 0.0);
    }

    const int H = img.height();
    const int W = img.width();
    Plane up(H, W);
    const double sy = static_cast<double>(a.h) / H;
    const double sx = static_cast<double>(a.w) / W;
    for (int y = 0; y < H; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, a.h - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, a.h - 1);
        const double ty = fy - y0;
        for (int x = 0; x < W; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, a.w - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, a.w - 1);
            const double tx = fx - x0;
            up.at(y, x) = (1 - ty) * ((1 - tx) * cam.at(y0, x0) + tx * cam.at(y0, x1)) +
                          ty * ((1 - tx) * cam.at(y1, x0) + tx * cam.at(y1, x1));
        }
    }
    const double mx = *std::max_element(up.values().begin(), up.values().end());
    if (mx > 0.0) {
        for (double& v : up.values()) {
            v /= mx;
        }
    }
    return up;
}

double mass_inside(const Plane& heatmap, const BinaryMask& mask)
{
    if (heatmap.height() != mask.height() || heatmap.width() != mask.width()) {
        throw DomainError("mass_inside: heatmap and mask differ in shape");
    }
    double in = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < heatmap.size(); ++i) {
        total += heatmap.values()[i];
        if (mask.values()[i] != 0) {
            in += heatmap.values()[i];
        }
    }
    return total > 0.0 ? in / total : 0.0;
}

ImageU8 heatmap_overlay(const ImageF& img, const Plane& heatmap)
{
    if (heatmap.height() != img.height() || heatmap.width() != img.width()) {
        throw DomainError("heatmap_overlay: shapes differ");
    }
    ImageF out(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const double t = heatmap.at(y, x);
            const double ramp[3] = {std::clamp(1.5 - std::abs(4 * t - 3), 0.0, 1.0),
                                    std::clamp(1.5 - std::abs(4 * t - 2), 0.0, 1.0),
                                    std::clamp(1.5 - std::abs(4 * t - 1), 0.0, 1.0)};
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = 0.5 * img.at(y, x, c) + 0.5 * ramp[c];
            }
        }
    }
    return to_u8(out);
}

// ------------------------------------------------------------- baselines

ImageF pgd_attack(const DetectorHandle& d, const ImageF& img, const PgdConfig& cfg)
{
    if (!(cfg.epsilon >= 0.0) || cfg.steps < 0 || !(cfg.step_size >= 0.0)) {
        throw ParameterError("pgd needs epsilon >= 0, steps >= 0, step_size >= 0");
    }
    if (!d.has_gradients()) {
        throw CapabilityError("pgd needs a detector with gradient access");
    }
    if (cfg.epsilon == 0.0 || cfg.steps == 0) {
        return img;
    }
    ImageF x = img;
    for (int s = 0; s < cfg.steps; ++s) {
        const DetectorProbe pr = d.probe(x, 1.0);
        auto xv = x.values();
        const auto g = pr.input_grad.values();
        const auto x0 = img.values();
        for (std::size_t i = 0; i < xv.size(); ++i) {
            const double sign = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
            const double v = xv[i] - cfg.step_size * sign;
            xv[i] = std::clamp(std::clamp(v, x0[i] - cfg.epsilon, x0[i] + cfg.epsilon), 0.0, 1.0);
        }
    }
    return x;
}

CamouflageParams handcrafted_params(Rng& rng, const ParamRanges& r)
{
    r.validate();
    CamouflageParams p;
    auto draw = [&](const Interval& iv, Head h) {
        const double u = rng.uniform();
        p.continuous[static_cast<std::size_t>(head_index(h))] = u;
        return iv.lo + u * (iv.hi - iv.lo);
    };
    p.sigma_gn = draw(r.sigma_gn, Head::SigmaGn);
    p.mu_gn = draw(r.mu_gn, Head::MuGn);
    p.sigma_gf = draw(r.sigma_gf, Head::SigmaGf);
    p.sigma_bl = draw(r.sigma_bl, Head::SigmaBl);
    auto pick = [&](const std::vector<int>& set, Head h) {
        const std::size_t i = rng.below(set.size());
        p.continuous[static_cast<std::size_t>(head_index(h))] =
            set.size() > 1 ? static_cast<double>(set[i] - set.front()) / (set.back() - set.front()) : 0.5;
        return set[i];
    };
    p.k_gf = pick(r.k_gf, Head::KGf);
    p.k_bl = pick(r.k_bl, Head::KBl);
    return p;
}

QualityBlock quality(const DetectorHandle& d, std::span<const ImageF> clean, std::span<const ImageF> processed)
{
    if (clean.size() != processed.size() || clean.empty()) {
        throw DomainError("quality needs matching, non-empty clean and processed sets");
    }
    QualityBlock q;
    q.n = clean.size();
    double ssim_sum = 0.0;
    double psnr_sum = 0.0;
    std::size_t finite = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        ssim_sum += ssim(clean[i], processed[i]);
        const double p = psnr(clean[i], processed[i]);
        if (std::isfinite(p)) {
            psnr_sum += p;
            ++finite;
        }
    }
    q.ssim = ssim_sum / static_cast<double>(q.n);
    q.psnr = finite == 0 ? kInfinity : psnr_sum / static_cast<double>(finite);
    q.fid = clean.size() >= 2 ? fid(d, clean, processed) : 0.0;
    return q;
}

// ---------------------------------------------------------------- report

json MetricsReport::to_json() const
{
    json rows_j = json::array();
    for (const auto& r : rows) {
        rows_j.push_back({{"detector", r.detector},
                          {"attack", r.attack},
                          {"postprocess", r.postprocess},
                          {"acc_real_as_real", r.acc_real_as_real},
                          {"n", r.n}});
    }
    json q = json::array();
    for (const auto& [attack, b] : quality) {
        q.push_back({{"attack", attack},
                     {"ssim", b.ssim},
                     {"psnr", psnr_json(b.psnr)},
                     {"fid", b.fid},
                     {"fid_extractor", b.fid_extractor},
                     {"n", b.n}});
    }
    return json{{"rows", rows_j},
                {"quality", q},
                {"jpeg_encoder", io::jpeg_encoder_tag()},
                {"config", config}};
}

void MetricsReport::write(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write report: " + path.string());
    }
    out << to_json().dump(2) << '\n';
}

void write_verdicts(const std::filesystem::path& path, std::span<const Verdict> verdicts)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write verdict log: " + path.string());
    }
    for (const auto& v : verdicts) {
        out << v.to_json().dump() << '\n';
    }
}

std::vector<Verdict> read_verdicts(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read verdict log: " + path.string());
    }
    std::vector<Verdict> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        out.push_back({j.at("image"), j.at("detector"), j.at("attack"), j.at("postprocess"), j.at("p_real"),
                       j.at("predicted")});
    }
    return out;
}

}  // namespace camo::metrics
