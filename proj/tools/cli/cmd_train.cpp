#include <fstream>

#include "camo/log.hpp"
#include "camo/trainer.hpp"
#include "context.hpp"

namespace camo::cli {

namespace {

json pick(const json& cfg, const json& keys_from)
{
    json out = json::object();
    for (const auto& [key, value] : keys_from.items()) {
        if (cfg.contains(key)) out[key] = cfg[key];
    }
    return out;
}

void add_train_detector(CLI::App& app)
{
    auto* sub = app.add_subcommand("train-detector", "Train the desk detector on reals versus pseudo-fakes");
    json d = run_defaults();
    d["manifest"] = nullptr;
    d["size"] = 128;
    const json det_keys = DetectorTrainConfig{}.to_json();
    d.update(det_keys);
    auto opts = std::make_shared<Options>(sub, d);
    sub->callback([opts, det_keys] {
        const Run run("train-detector", opts->resolve());
        const json& cfg = run.config();
        const DetectorTrainConfig dc = DetectorTrainConfig::from_json(pick(cfg, det_keys));
        const DatasetManifest manifest = open_manifest(cfg);
        const int size = static_cast<int>(setting<long long>(cfg, "size"));

        const DetectorTrainResult res = train_desk_detector(manifest, dc, size);

        const fs::path ckpt = run.dir("checkpoints") / "detector.ckpt";
        res.detector.save(ckpt);
        register_detector(run.out(), dc.name, ckpt);
        std::ofstream log_out(run.dir("logs") / "detector_train.jsonl", std::ios::binary);
        for (const auto& h : res.history) {
            log_out << h.dump() << '\n';
        }
        write_json(run.dir("reports") / "detector_gate.json",
                   json{{"balanced_accuracy", res.balanced_accuracy},
                        {"tpr_real", res.tpr_real},
                        {"tnr_fake", res.tnr_fake},
                        {"epochs", res.epochs},
                        {"holdout_images", res.holdout_images},
                        {"gate", dc.gate},
                        {"checkpoint", ckpt.string()},
                        {"param_hash", res.detector.param_hash()}});
        log::info("detector '" + dc.name + "' balanced accuracy " + std::to_string(res.balanced_accuracy) +
                  " -> " + ckpt.string());
    });
}

void add_train(CLI::App& app)
{
    auto* sub = app.add_subcommand("train", "Train the camouflage generator against a frozen detector");
    json d = run_defaults();
    d["manifest"] = nullptr;
    d["detector"] = nullptr;
    d["size"] = 128;
    d["gate"] = 0.90;
    d["val_count"] = 48;
    const json train_keys = TrainConfig{}.to_json();
    d.update(train_keys);
    auto opts = std::make_shared<Options>(sub, d);
    sub->callback([opts, train_keys] {
        const Run run("train", opts->resolve());
        const json& cfg = run.config();
        const TrainConfig tc = TrainConfig::from_json(pick(cfg, train_keys));
        const double gate = setting<double>(cfg, "gate");
        const auto val_count = static_cast<std::size_t>(setting<long long>(cfg, "val_count"));
        const DetectorHandle detector = open_detector(setting<std::string>(cfg, "detector"), run.out());
        const DatasetManifest manifest = open_manifest(cfg);

        std::vector<FaceRecord> train = load_reals(manifest, cfg, Split::train);
        if (val_count < 1 || train.size() <= val_count) {
            throw PreconditionError("need more than val_count=" + std::to_string(val_count) +
                                    " train reals, manifest has " + std::to_string(train.size()));
        }
        std::vector<FaceRecord> val(std::make_move_iterator(train.end() - static_cast<std::ptrdiff_t>(val_count)),
                                    std::make_move_iterator(train.end()));
        train.resize(train.size() - val_count);

        std::ofstream log_out(run.dir("logs") / "train.jsonl", std::ios::binary);
        const TrainResult res = train_camgan(train, val, detector, tc, gate, [&](const TrainLogRecord& r) {
            log_out << r.to_json().dump() << '\n';
            if (r.step % 50 == 0) {
                log::info("step " + std::to_string(r.step) + " p_real " + std::to_string(r.p_real) + " penalty " +
                          std::to_string(r.penalty));
            }
        });
        log_out.close();

        res.generator.save(run.dir("checkpoints") / "generator.ckpt");
        res.visual.save(run.dir("checkpoints") / "visual.ckpt");
        std::ofstream val_out(run.dir("logs") / "validation.jsonl", std::ios::binary);
        json selected;
        for (const auto& v : res.validations) {
            val_out << v.to_json().dump() << '\n';
            if (v.step == res.selected_step) selected = v.to_json();
        }
        write_json(run.dir("reports") / "train_summary.json",
                   json{{"selected_step", res.selected_step},
                        {"selected_validation", selected},
                        {"detector", detector.name()},
                        {"detector_hash", detector.param_hash()},
                        {"detector_gate",
                         {{"balanced_accuracy", res.detector_gate.balanced_accuracy},
                          {"tpr_real", res.detector_gate.tpr_real},
                          {"tnr_fake", res.detector_gate.tnr_fake}}},
                        {"steps", res.log.size()}});
        log::info("selected step " + std::to_string(res.selected_step) + " -> " +
                  (run.dir("checkpoints") / "generator.ckpt").string());
    });
}

}  // namespace

void add_train_commands(CLI::App& app)
{
    add_train_detector(app);
    add_train(app);
}

}  // namespace camo::cli
