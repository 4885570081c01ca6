#include <fstream>

#include "camo/image_io.hpp"
#include "camo/log.hpp"
#include "camo/metrics.hpp"
#include "camo/random.hpp"
#include "context.hpp"

namespace camo::cli {

namespace {

constexpr std::uint64_t kHandcraftedStream = 0x4843;

struct Attacked {
    std::vector<ImageF> images;
    std::vector<json> params;  // per image, empty for attacks without parameters
};

metrics::PgdConfig pgd_config(const json& cfg)
{
    metrics::PgdConfig p;
    p.epsilon = setting<double>(cfg, "pgd_epsilon");
    p.steps = static_cast<int>(setting<long long>(cfg, "pgd_steps"));
    p.step_size = setting<double>(cfg, "pgd_step_size");
    if (!(p.epsilon >= 0.0) || p.steps < 0 || !(p.step_size >= 0.0)) {
        throw ConfigError("PGD settings must be non-negative");
    }
    return p;
}

json pgd_defaults()
{
    const metrics::PgdConfig p;
    return json{{"pgd_epsilon", p.epsilon}, {"pgd_steps", p.steps}, {"pgd_step_size", p.step_size}};
}

/// Applies `attack` to every record. Noise seeds are mix_seed(seed, index) for
/// every parametric attack, so camouflage and evaluate agree image by image.
Attacked apply_attack(const std::string& attack, const std::vector<FaceRecord>& recs, const json& cfg,
                      std::uint64_t seed, const DetectorHandle* target)
{
    Attacked out;
    out.images.reserve(recs.size());
    if (attack == "none") {
        for (const auto& r : recs) out.images.push_back(r.image);
    } else if (attack == "camgan") {
        GeneratorModel g = open_generator(cfg);
        for (std::size_t i = 0; i < recs.size(); ++i) {
            const CamouflageParams p = generate_params(g, recs[i].image);
            out.images.push_back(camouflage(recs[i], p, mix_seed(seed, i)));
            out.params.push_back(params_to_json(p));
        }
    } else if (attack == "handcrafted") {
        Rng rng(mix_seed(seed, kHandcraftedStream));
        const ParamRanges ranges;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            const CamouflageParams p = metrics::handcrafted_params(rng, ranges);
            out.images.push_back(camouflage(recs[i], p, mix_seed(seed, i)));
            out.params.push_back(params_to_json(p));
        }
    } else if (attack == "pgd") {
        const auto pc = pgd_config(cfg);
        for (const auto& r : recs) out.images.push_back(metrics::pgd_attack(*target, r.image, pc));
    } else {
        throw ConfigError("unknown attack '" + attack + "' (none|camgan|pgd|handcrafted)");
    }
    return out;
}

std::vector<std::string> ids_of(const std::vector<FaceRecord>& recs)
{
    std::vector<std::string> ids;
    for (const auto& r : recs) ids.push_back(r.source_id);
    return ids;
}

/// Loads the split at the detector's input size unless `size` is set.
std::vector<FaceRecord> load_for(const json& cfg, const DetectorHandle& d)
{
    json c = cfg;
    if (setting<long long>(c, "size") == 0) c["size"] = d.input_size();
    return load_reals(open_manifest(c), c, parse_split_setting(c));
}

void write_images(const fs::path& dir, const std::vector<FaceRecord>& recs, const Attacked& a,
                  const std::string& suffix = "")
{
    for (std::size_t i = 0; i < recs.size(); ++i) {
        io::write_png(dir / (recs[i].source_id + suffix + ".png"), to_u8(a.images[i]));
    }
    if (!a.params.empty()) {
        std::ofstream out(dir / "params.jsonl", std::ios::binary);
        for (std::size_t i = 0; i < recs.size(); ++i) {
            out << json{{"image", recs[i].source_id}, {"index", i}, {"params", a.params[i]}}.dump() << '\n';
        }
    }
}

/// detectors x attacks x post-processes; PGD targets the first detector and
/// the FID surrogate uses its features.
void evaluate_into(const Run& run, const std::vector<std::string>& detector_refs,
                   const std::vector<std::string>& attacks, const std::string& report_name)
{
    const json& cfg = run.config();
    if (detector_refs.empty()) throw ConfigError("at least one detector is required");
    if (attacks.empty()) throw ConfigError("at least one attack is required");
    std::vector<DetectorHandle> detectors;
    for (const auto& ref : detector_refs) detectors.push_back(open_detector(ref, run.out()));
    const auto recs = load_for(cfg, detectors.front());
    const auto ids = ids_of(recs);
    std::vector<ImageF> clean;
    for (const auto& r : recs) clean.push_back(r.image);

    metrics::MetricsReport report;
    report.config = cfg;
    std::vector<metrics::Verdict> verdicts;
    for (const auto& attack : attacks) {
        const Attacked a = apply_attack(attack, recs, cfg, run.seed(), &detectors.front());
        for (const auto& d : detectors) {
            auto rows = metrics::robustness_suite(a.images, ids, d, attack, mix_seed(run.seed(), 0x505), &verdicts);
            report.rows.insert(report.rows.end(), rows.begin(), rows.end());
        }
        report.quality.emplace_back(attack, metrics::quality(detectors.front(), clean, a.images));
        log::info("evaluated attack '" + attack + "'");
    }
    report.write(run.dir("reports") / (report_name + ".json"));
    metrics::write_verdicts(run.dir("reports") / "verdicts.jsonl", verdicts);
    log::info("report: " + (run.dir("reports") / (report_name + ".json")).string());
}

json eval_defaults()
{
    json d = run_defaults();
    d["manifest"] = nullptr;
    d["split"] = "test";
    d["size"] = 0;
    d["limit"] = 0;
    d["generator"] = "";
    d.update(pgd_defaults());
    return d;
}

void add_camouflage(CLI::App& app)
{
    auto* sub = app.add_subcommand("camouflage", "Camouflage every real face of a split with a trained generator");
    json d = eval_defaults();
    d["identity"] = false;
    for (const char* k : {"pgd_epsilon", "pgd_steps", "pgd_step_size"}) d.erase(k);
    auto opts = std::make_shared<Options>(sub, d);
    sub->callback([opts] {
        const Run run("camouflage", opts->resolve());
        const json& cfg = run.config();
        const auto recs = load_reals(open_manifest(cfg), cfg, parse_split_setting(cfg));
        Attacked a;
        if (setting<bool>(cfg, "identity")) {
            for (std::size_t i = 0; i < recs.size(); ++i) {
                const CamouflageParams p = CamouflageParams::identity();
                a.images.push_back(camouflage(recs[i], p, mix_seed(run.seed(), i)));
                a.params.push_back(params_to_json(p));
            }
        } else {
            a = apply_attack("camgan", recs, cfg, run.seed(), nullptr);
        }
        write_images(run.dir("images"), recs, a);
        log::info("wrote " + std::to_string(recs.size()) + " images to " + run.dir("images").string());
    });
}

void add_evaluate(CLI::App& app)
{
    auto* sub = app.add_subcommand("evaluate", "Accuracy, robustness and image-quality report");
    json d = eval_defaults();
    d["detectors"] = json::array();
    d["attacks"] = {"none", "camgan", "pgd", "handcrafted"};
    auto opts = std::make_shared<Options>(sub, d);
    sub->callback([opts] {
        const Run run("evaluate", opts->resolve());
        evaluate_into(run, setting<std::vector<std::string>>(run.config(), "detectors"),
                      setting<std::vector<std::string>>(run.config(), "attacks"), "metrics");
    });
}

void add_robustness(CLI::App& app)
{
    auto* sub = app.add_subcommand("robustness", "Camouflaged-set accuracy under JPEG, filtering and noise");
    json d = eval_defaults();
    d["detector"] = nullptr;
    auto opts = std::make_shared<Options>(sub, d);
    sub->callback([opts] {
        const Run run("robustness", opts->resolve());
        evaluate_into(run, {setting<std::string>(run.config(), "detector")}, {"camgan"}, "robustness");
    });
}

void add_gradcam(CLI::App& app)
{
    auto* sub = app.add_subcommand("gradcam", "Grad-CAM overlays and hull-mass statistics");
    json d = eval_defaults();
    d["detector"] = nullptr;
    d["target"] = "fake";
    d["limit"] = 8;
    for (const char* k : {"pgd_epsilon", "pgd_steps", "pgd_step_size"}) d.erase(k);
    auto opts = std::make_shared<Options>(sub, d);
    sub->callback([opts] {
        const Run run("gradcam", opts->resolve());
        const json& cfg = run.config();
        const auto target_name = setting<std::string>(cfg, "target");
        if (target_name != "fake" && target_name != "real") throw ConfigError("target must be fake|real");
        const Label target = target_name == "fake" ? Label::fake : Label::real;
        const DetectorHandle det = open_detector(setting<std::string>(cfg, "detector"), run.out());
        const auto recs = load_for(cfg, det);
        const bool with_camo = !setting<std::string>(cfg, "generator").empty();
        Attacked camo;
        if (with_camo) camo = apply_attack("camgan", recs, cfg, run.seed(), nullptr);

        json per_image = json::array();
        double flagged_mass = 0.0;
        std::size_t flagged = 0;
        std::size_t increased = 0;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            const Plane h_clean = metrics::grad_cam(det, recs[i].image, target);
            const double m_clean = metrics::mass_inside(h_clean, recs[i].hull_mask);
            io::write_png(run.dir("images") / (recs[i].source_id + "_clean_cam.png"),
                          metrics::heatmap_overlay(recs[i].image, h_clean));
            json row{{"image", recs[i].source_id}, {"p_real_clean", det.predict(recs[i].image)}, {"mass_clean", m_clean}};
            if (with_camo) {
                const Plane h_camo = metrics::grad_cam(det, camo.images[i], target);
                const double m_camo = metrics::mass_inside(h_camo, recs[i].hull_mask);
                const double p = det.predict(camo.images[i]);
                io::write_png(run.dir("images") / (recs[i].source_id + "_camo_cam.png"),
                              metrics::heatmap_overlay(camo.images[i], h_camo));
                row["p_real_camouflaged"] = p;
                row["mass_camouflaged"] = m_camo;
                if (metrics::decide(p) == Label::fake) {
                    flagged_mass += m_camo;
                    ++flagged;
                }
                increased += m_camo > m_clean ? 1 : 0;
            }
            per_image.push_back(row);
        }
        json summary{{"images", recs.size()}, {"target", target_name}};
        if (with_camo) {
            summary["flagged_fake"] = flagged;
            summary["mean_mass_flagged"] = flagged == 0 ? 0.0 : flagged_mass / static_cast<double>(flagged);
            summary["pair_increase_fraction"] = static_cast<double>(increased) / static_cast<double>(recs.size());
        }
        write_json(run.dir("reports") / "gradcam.json", json{{"summary", summary}, {"images", per_image}});
    });
}

void add_baseline(CLI::App& app)
{
    auto* group = app.add_subcommand("baseline", "Reference attacks: PGD or random-parameter camouflage");
    group->require_subcommand(1);
    for (const std::string attack : {"pgd", "handcrafted"}) {
        auto* sub = group->add_subcommand(
            attack, attack == "pgd" ? "L-infinity PGD on the detector" : "Camouflage with uniformly random parameters");
        json d = eval_defaults();
        d.erase("generator");
        d["detector"] = nullptr;
        if (attack == "handcrafted") {
            for (const char* k : {"pgd_epsilon", "pgd_steps", "pgd_step_size"}) d.erase(k);
        }
        auto opts = std::make_shared<Options>(sub, d);
        sub->callback([opts, attack] {
            const Run run("baseline-" + attack, opts->resolve());
            const json& cfg = run.config();
            const DetectorHandle det = open_detector(setting<std::string>(cfg, "detector"), run.out());
            const auto recs = load_for(cfg, det);
            const Attacked a = apply_attack(attack, recs, cfg, run.seed(), &det);
            write_images(run.dir("images"), recs, a);

            std::vector<ImageF> clean;
            for (const auto& r : recs) clean.push_back(r.image);
            metrics::MetricsReport report;
            report.config = cfg;
            std::vector<metrics::Verdict> verdicts;
            report.rows = metrics::robustness_suite(a.images, ids_of(recs), det, attack, mix_seed(run.seed(), 0x505),
                                                    &verdicts);
            report.quality.emplace_back(attack, metrics::quality(det, clean, a.images));
            report.write(run.dir("reports") / "baseline.json");
            metrics::write_verdicts(run.dir("reports") / "verdicts.jsonl", verdicts);
        });
    }
}

}  // namespace

void add_eval_commands(CLI::App& app)
{
    add_camouflage(app);
    add_evaluate(app);
    add_robustness(app);
    add_gradcam(app);
    add_baseline(app);
}

}  // namespace camo::cli
