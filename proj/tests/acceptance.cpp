// Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "camo/camouflage.hpp"
#include "camo/discriminators.hpp"
#include "camo/error.hpp"
#include "camo/generator.hpp"
#include "camo/geometry.hpp"
#include "camo/log.hpp"
#include "camo/metrics.hpp"
#include "camo/synth.hpp"
#include "camo/trainer.hpp"
#include "camo_ref/reference.hpp"

using namespace camo;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int failures = 0;

void report(int n, const std::string& title, const Outcome& o)
{
    std::printf("%s criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", n, title.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
}

ImageF random_image(Rng& rng, int h, int w)
{
    ImageF img(h, w);
    for (double& v : img.values()) v = rng.uniform();
    return img;
}

bool same_vertex_set(std::vector<Point> a, std::vector<Point> b)
{
    auto less = [](const Point& p, const Point& q) { return p.x < q.x || (p.x == q.x && p.y < q.y); };
    std::sort(a.begin(), a.end(), less);
    std::sort(b.begin(), b.end(), less);
    return a == b;
}

// ------------------------------------------------------------------ 1

Outcome ops_oracles()
{
    const auto t0 = Clock::now();
    Outcome o;
    Rng rng(2024);

    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const ImageF img = random_image(rng, 16, 16);
        const int k = 1 + 2 * static_cast<int>(rng.below(8));
        const double sigma = rng.uniform(0.2, 4.0);
        worst = std::max(worst, max_abs_diff(gaussian_filter(img, k, sigma),
                                              ref::convolve_2d(img, ref::gaussian_kernel_2d(k, sigma))));
    }
    o.require(worst <= 1e-6, "filter vs brute force");
    o.note("filter max err " + fmt("%.2e", worst));

    double norm = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const int k = 1 + 2 * static_cast<int>(rng.below(16));
        const Plane kern = gaussian_kernel(k, rng.uniform(0.05, 20.0));
        double sum = 0.0;
        for (double v : kern.values()) sum += v;
        norm = std::max(norm, std::abs(sum - 1.0));
    }
    o.require(norm <= 1e-12, "kernel normalization");
    o.note("kernel sum err " + fmt("%.1e", norm));

    int hull_bad = 0, raster_bad = 0, raster_n = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Point> pts;
        const std::size_t n = 3 + rng.below(120);
        for (std::size_t i = 0; i < n; ++i) pts.push_back({rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0)});
        hull_bad += same_vertex_set(convex_hull(pts), ref::hull_vertices(pts)) ? 0 : 1;
    }
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<Point> pts;
        const std::size_t n = 3 + rng.below(8);
        for (std::size_t i = 0; i < n; ++i) pts.push_back({rng.uniform(0.0, 39.0), rng.uniform(0.0, 39.0)});
        std::vector<Point> poly;
        try {
            poly = convex_hull(pts);
        } catch (const GeometryError&) {
            continue;
        }
        ++raster_n;
        raster_bad += rasterize_hull(poly, 40, 40) == ref::segment_closure(ref::rasterize_polygon(poly, 40, 40)) ? 0 : 1;
    }
    o.require(hull_bad == 0, "convex hull vs brute force");
    o.require(raster_bad == 0, "rasterization vs brute force");
    o.note("hull 100/100, raster " + std::to_string(raster_n - raster_bad) + "/" + std::to_string(raster_n));

    const ImageF grey(578, 577, 0.5);
    const ImageF noisy = add_gaussian_noise(grey, 0.0, 0.05, 1234);
    const auto n = static_cast<double>(noisy.size());
    double sum = 0.0;
    for (double v : noisy.values()) sum += v - 0.5;
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : noisy.values()) ss += (v - 0.5 - mean) * (v - 0.5 - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    o.require(std::abs(mean) <= 0.001, "noise mean");
    o.require(std::abs(sd - 0.05) <= 0.0005, "noise std");
    o.note("noise mean " + fmt("%.1e", mean) + " std " + fmt("%.5f", sd));

    const double t = seconds_since(t0);
    o.require(t < 120.0, "runtime under 2 min");
    o.note(fmt("%.1fs", t));
    return o;
}

// ------------------------------------------------------------------ 2

Outcome loss_exactness()
{
    const auto t0 = Clock::now();
    Outcome o;
    o.require(loss_ds(1.0) == 0.0, "loss_ds(1)");
    o.require(std::abs(loss_ds(0.5) + 0.6931) <= 1e-4, "loss_ds(0.5)");
    o.require(std::isfinite(loss_ds(0.0)) && loss_ds(0.0) == std::log(1e-6), "loss_ds(0) floor");

    std::array<double, kHeadCount> half;
    half.fill(0.5);
    o.require(std::abs(loss_vc(half) - std::log(0.5)) <= 1e-12, "loss_vc at 0.5");
    o.require(loss_vc({1.0, 0.5, 1.0, 1.0, 1e-6, 1e-6}) > 20.0, "loss_vc at maximal distortion");

    o.require(std::abs(penalty(0.0, 0.0, 1.0)) <= 1e-15, "penalty symmetry");
    o.require(std::abs(penalty(0.0, 0.0, 0.0) - std::exp(0.5)) <= 1e-12, "penalty lambda 0");
    o.require(std::abs(penalty(-1e9, 1e9, 1.0) - (1.0 - std::exp(1.0))) <= 1e-12, "penalty limit");

    std::array<double, 2> theta{0.3, 0.7};
    const std::array<double, 2> grad{1.0 / theta[0], 1.0 / theta[1]};
    const double p = penalty(std::log(0.4), 0.25, 0.5);
    const std::array<double, 2> want{theta[0] - 1e-2 * p * grad[0], theta[1] - 1e-2 * p * grad[1]};
    rl_update(theta, grad, 1e-2, p);
    const double toy_err = std::max(std::abs(theta[0] - want[0]), std::abs(theta[1] - want[1]));
    o.require(toy_err <= 1e-10, "two-parameter update");

    // Generator gradient against central differences; leak 1 keeps the
    // backbone smooth so the difference quotient does not straddle a kink.
    int ok = 0, total = 0;
    Rng rng(8);
    for (std::uint64_t model = 0; model < 3; ++model) {
        nn::NetSpec smooth = GeneratorModel::desk_backbone();
        smooth.leak = 1.0f;
        GeneratorModel g(smooth, ParamRanges{}, 13 + model);
        auto flat = g.net().flat_params();
        for (float& v : flat) v += static_cast<float>(0.05 * rng.normal());
        g.net().set_flat_params(flat);
        const ImageF img = random_image(rng, 32, 32);
        g.net().zero_grad();
        g.backward_heads(std::vector<std::array<double, kHeadCount>>{loss_vc_grad(g.heads(img))});
        auto params = g.net().params();
        for (int s = 0; s < 200; ++s) {
            nn::ParamRef& ref = params[rng.below(params.size())];
            const std::size_t i = rng.below(ref.value->size());
            const float keep = (*ref.value)[i];
            const double step = 3e-2 * std::max(1.0, std::abs(static_cast<double>(keep)));
            (*ref.value)[i] = static_cast<float>(keep + step);
            const double hi = (*ref.value)[i];
            const double up = loss_vc(g.heads(img));
            (*ref.value)[i] = static_cast<float>(keep - step);
            const double lo = (*ref.value)[i];
            const double down = loss_vc(g.heads(img));
            (*ref.value)[i] = keep;
            const double fd = (up - down) / (hi - lo);
            const double an = (*ref.grad)[i];
            ok += std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3}) < 1e-3 ? 1 : 0;
            ++total;
        }
    }
    const double frac = static_cast<double>(ok) / total;
    o.require(frac >= 0.95, "finite differences");
    o.note("toy err " + fmt("%.1e", toy_err) + ", FD agreement " + fmt("%.3f", frac));

    const double t = seconds_since(t0);
    o.require(t < 300.0, "runtime under 5 min");
    o.note(fmt("%.1fs", t));
    return o;
}

// ------------------------------------------------------------------ 3-10

struct Corpus {
    std::vector<FaceRecord> train;  // generator training reals
    std::vector<FaceRecord> val;    // checkpoint selection
    std::vector<FaceRecord> all_train;
    std::vector<FaceRecord> test;
};

Corpus make_corpus()
{
    synth::CorpusSpec spec;  // 500 train + 150 test reals at 128 px
    Corpus c;
    c.all_train = synth::make_records(spec, Split::train);
    c.test = synth::make_records(spec, Split::test);
    const std::size_t val_count = 48;
    c.train.assign(c.all_train.begin(), c.all_train.end() - static_cast<std::ptrdiff_t>(val_count));
    c.val.assign(c.all_train.end() - static_cast<std::ptrdiff_t>(val_count), c.all_train.end());
    return c;
}

struct AttackEval {
    std::vector<ImageF> images;
    double acc = 0.0;   // ACC-as-real
    double ssim = 0.0;  // mean over pairs
};

AttackEval evaluate_images(const DetectorHandle& d, const std::vector<FaceRecord>& recs, std::vector<ImageF> images)
{
    AttackEval e;
    e.images = std::move(images);
    e.acc = metrics::accuracy(d, e.images, Label::real);
    for (std::size_t i = 0; i < recs.size(); ++i) e.ssim += metrics::ssim(recs[i].image, e.images[i]);
    e.ssim /= static_cast<double>(recs.size());
    return e;
}

AttackEval camouflage_set(GeneratorModel& g, const DetectorHandle& d, const std::vector<FaceRecord>& recs,
                          std::uint64_t seed)
{
    std::vector<ImageF> out;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        out.push_back(camouflage(recs[i], generate_params(g, recs[i].image), mix_seed(seed, i)));
    }
    return evaluate_images(d, recs, std::move(out));
}

struct PipelineRun {
    DetectorTrainResult detector;
    TrainResult camgan;
    double detector_seconds = 0.0;
    double camgan_seconds = 0.0;
    double clean_acc = 0.0;
    AttackEval camouflaged;
    json logged;  // every metric the run logs, for the determinism check
};

PipelineRun run_pipeline(const Corpus& c, const TrainConfig& tc)
{
    PipelineRun r;
    auto t0 = Clock::now();
    r.detector = train_desk_detector(c.all_train, c.test, DetectorTrainConfig{});
    r.detector_seconds = seconds_since(t0);

    t0 = Clock::now();
    json steps = json::array();
    r.camgan = train_camgan(c.train, c.val, r.detector.detector, tc, 0.90,
                            [&](const TrainLogRecord& rec) { steps.push_back(rec.to_json()); });
    r.camgan_seconds = seconds_since(t0);

    std::vector<ImageF> clean;
    for (const auto& rec : c.test) clean.push_back(rec.image);
    r.clean_acc = metrics::accuracy(r.detector.detector, clean, Label::real);
    r.camouflaged = camouflage_set(r.camgan.generator, r.detector.detector, c.test, tc.seed);

    json vals = json::array();
    for (const auto& v : r.camgan.validations) vals.push_back(v.to_json());
    r.logged = json{{"detector_history", r.detector.history},
                    {"detector_bacc", r.detector.balanced_accuracy},
                    {"detector_tpr", r.detector.tpr_real},
                    {"detector_tnr", r.detector.tnr_fake},
                    {"detector_epochs", r.detector.epochs},
                    {"detector_hash", r.detector.detector.param_hash()},
                    {"train_log", steps},
                    {"validations", vals},
                    {"selected_step", r.camgan.selected_step},
                    {"generator_hash", r.camgan.generator.net().param_hash()},
                    {"clean_acc", r.clean_acc},
                    {"camouflaged_acc", r.camouflaged.acc},
                    {"camouflaged_ssim", r.camouflaged.ssim}};
    return r;
}

double success_rate(const AttackEval& e) { return 1.0 - e.acc; }

}  // namespace

int main()
{
    log::set_level(log::Level::warn);
    const auto t_all = Clock::now();

    report(1, "ops oracle suite", ops_oracles());
    report(2, "loss and update exactness", loss_exactness());

    const Corpus corpus = make_corpus();
    const TrainConfig tc;
    std::printf("corpus: %zu generator-train, %zu validation, %zu test reals at 128 px\n", corpus.train.size(),
                corpus.val.size(), corpus.test.size());
    std::fflush(stdout);

    PipelineRun run;
    bool pipeline_ok = true;
    std::string pipeline_error;
    try {
        run = run_pipeline(corpus, tc);
    } catch (const Error& e) {
        pipeline_ok = false;
        pipeline_error = e.what();
    }
    if (!pipeline_ok) {
        Outcome o;
        o.require(false, pipeline_error);
        for (int n = 3; n <= 10; ++n) report(n, "pipeline did not complete", o);
        return 1;
    }
    const DetectorHandle& det = run.detector.detector;

    {
        Outcome o;
        o.require(run.detector.balanced_accuracy >= 0.90, "balanced accuracy >= 0.90");
        o.require(run.detector.holdout_images >= 100, "held-out slice >= 100 images");
        o.require(run.detector_seconds < 7200.0, "runtime under 2 h CPU");
        o.note("bacc " + fmt("%.3f", run.detector.balanced_accuracy) + " on " +
               std::to_string(run.detector.holdout_images) + " held-out images, " +
               std::to_string(run.detector.epochs) + " epochs, " + fmt("%.0fs", run.detector_seconds));
        report(3, "desk detector gate", o);
    }
    {
        Outcome o;
        o.require(run.camouflaged.acc <= 0.30, "camouflaged ACC <= 0.30");
        o.require(run.clean_acc >= 0.80, "clean ACC >= 0.80");
        o.require(run.camouflaged.ssim >= 0.95, "mean SSIM >= 0.95");
        o.require(run.detector_seconds + run.camgan_seconds <= 7200.0, "runtime within 2 h");
        o.note("clean ACC " + fmt("%.3f", run.clean_acc) + ", camouflaged ACC " + fmt("%.3f", run.camouflaged.acc) +
               ", SSIM " + fmt("%.4f", run.camouflaged.ssim) + ", selected step " +
               std::to_string(run.camgan.selected_step) + ", " + fmt("%.0fs", run.camgan_seconds));
        report(4, "end-to-end camouflage efficacy", o);
    }
    {
        Outcome o;
        TrainConfig no_v = tc;
        no_v.visual_enabled = false;
        const TrainResult ablated = train_camgan(corpus.train, corpus.val, det, no_v, 0.90);
        GeneratorModel g = ablated.generator;
        const AttackEval e = camouflage_set(g, det, corpus.test, tc.seed);
        o.require(success_rate(e) >= 0.95, "success rate >= 0.95 without V");
        o.require(e.ssim < run.camouflaged.ssim, "SSIM below the full system");
        o.note("success " + fmt("%.3f", success_rate(e)) + ", SSIM " + fmt("%.4f", e.ssim) + " vs full " +
               fmt("%.4f", run.camouflaged.ssim));
        report(5, "ablation without the visual discriminator", o);
    }
    {
        Outcome o;
        Rng rng(mix_seed(tc.seed, 0x4843));
        std::vector<ImageF> hc;
        for (std::size_t i = 0; i < corpus.test.size(); ++i) {
            hc.push_back(camouflage(corpus.test[i], metrics::handcrafted_params(rng, ParamRanges{}),
                                    mix_seed(tc.seed, i)));
        }
        const AttackEval e = evaluate_images(det, corpus.test, std::move(hc));
        const double drop_hc = run.clean_acc - e.acc;
        const double drop_camgan = run.clean_acc - run.camouflaged.acc;
        o.require(drop_hc < drop_camgan, "handcrafted drop strictly smaller");
        o.note("ACC drop handcrafted " + fmt("%.3f", drop_hc) + " vs learned " + fmt("%.3f", drop_camgan));
        report(6, "handcrafted baseline ordering", o);
    }
    {
        Outcome o;
        const auto rows = metrics::robustness_suite(run.camouflaged.images, {}, det, "camgan", mix_seed(tc.seed, 0x505));
        const double base = rows.front().acc_real_as_real;
        std::string d;
        for (const auto& r : rows) {
            if (r.postprocess == "none") continue;
            o.require(std::abs(r.acc_real_as_real - base) <= 0.25, r.postprocess + " deviation <= 0.25");
            o.require(r.acc_real_as_real <= 0.5, r.postprocess + " ACC <= 0.5");
            d += (d.empty() ? "" : ", ") + r.postprocess + " " + fmt("%.3f", r.acc_real_as_real);
        }
        o.note("unprocessed " + fmt("%.3f", base) + ", " + d);
        report(7, "robustness to post-processing", o);
    }
    {
        Outcome o;
        double mass = 0.0;
        std::size_t flagged = 0, increased = 0;
        for (std::size_t i = 0; i < corpus.test.size(); ++i) {
            const FaceRecord& rec = corpus.test[i];
            const ImageF& cam = run.camouflaged.images[i];
            const double m_cam = metrics::mass_inside(metrics::grad_cam(det, cam, Label::fake), rec.hull_mask);
            const double m_clean = metrics::mass_inside(metrics::grad_cam(det, rec.image, Label::fake), rec.hull_mask);
            if (metrics::decide(det.predict(cam)) == Label::fake) {
                mass += m_cam;
                ++flagged;
            }
            increased += m_cam > m_clean ? 1 : 0;
        }
        const double mean_mass = flagged == 0 ? 0.0 : mass / static_cast<double>(flagged);
        const double frac = static_cast<double>(increased) / static_cast<double>(corpus.test.size());
        o.require(flagged > 0, "some camouflaged image flagged fake");
        o.require(mean_mass >= 0.60, "mean hull mass >= 0.60");
        o.require(frac >= 0.70, "paired increase on >= 70%");
        o.note(std::to_string(flagged) + " flagged, mean hull mass " + fmt("%.3f", mean_mass) +
               ", paired increase " + fmt("%.3f", frac));
        report(8, "Grad-CAM concentration", o);
    }
    {
        Outcome o;
        std::vector<ImageF> adv;
        for (const auto& rec : corpus.test) adv.push_back(metrics::pgd_attack(det, rec.image, metrics::PgdConfig{}));
        const AttackEval e = evaluate_images(det, corpus.test, std::move(adv));
        const double drop_pgd = run.clean_acc - e.acc;
        const double drop_camgan = run.clean_acc - run.camouflaged.acc;
        // "Comparable" allows PGD to trail by at most 0.05.
        o.require(drop_pgd >= drop_camgan - 0.05, "PGD drop comparable or better");
        o.require(e.ssim < run.camouflaged.ssim, "PGD SSIM strictly lower");
        o.note("ACC drop PGD " + fmt("%.3f", drop_pgd) + " vs learned " + fmt("%.3f", drop_camgan) + ", SSIM PGD " +
               fmt("%.4f", e.ssim) + " vs learned " + fmt("%.4f", run.camouflaged.ssim));
        report(9, "PGD comparison", o);
    }
    {
        Outcome o;
        const PipelineRun again = run_pipeline(corpus, tc);
        const bool same = again.logged.dump() == run.logged.dump();
        o.require(same, "logged metrics differ");
        if (!same) {
            for (const auto& [key, value] : run.logged.items()) {
                if (again.logged[key] != value) o.note("differs: " + key);
            }
        }
        o.note(std::to_string(run.logged["train_log"].size()) + " step records, " +
               std::to_string(run.logged["detector_history"].size()) + " detector epochs compared");
        report(10, "determinism of the detector and camouflage runs", o);
    }

    std::printf("acceptance: %d of 10 criteria failed, %.0fs total\n", failures, seconds_since(t_all));
    return failures == 0 ? 0 : 1;
}
