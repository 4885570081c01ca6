#include <set>

#include "camo/checkpoint.hpp"
#include "camo/image_io.hpp"
#include "camo/log.hpp"
#include "camo/synth.hpp"
#include "context.hpp"

namespace camo::cli {

namespace {

void add_synth_corpus(CLI::App& app)
{
    auto* sub = app.add_subcommand("synth-corpus", "Render a procedural face corpus with landmarks and a manifest");
    json d{{"dir", nullptr},          {"size", 128}, {"train_reals", 500}, {"test_reals", 150},
           {"seed", std::uint64_t{1}}, {"log_level", "info"}};
    auto opts = std::make_shared<Options>(sub, d);
    sub->callback([opts] {
        const json cfg = opts->resolve();
        apply_log_level(cfg);
        synth::CorpusSpec spec;
        spec.size = static_cast<int>(setting<long long>(cfg, "size"));
        spec.train_reals = static_cast<int>(setting<long long>(cfg, "train_reals"));
        spec.test_reals = static_cast<int>(setting<long long>(cfg, "test_reals"));
        spec.seed = setting<std::uint64_t>(cfg, "seed");
        if (spec.size < 32 || spec.train_reals < 0 || spec.test_reals < 0) {
            throw ConfigError("synth-corpus needs size >= 32 and non-negative counts");
        }
        const fs::path dir = setting<std::string>(cfg, "dir");
        const fs::path manifest = synth::write_corpus(dir, spec);
        write_json(dir / "run_config.json", json{{"command", "synth-corpus"}, {"config", cfg}, {"seed", spec.seed}});
        log::info("wrote " + manifest.string());
    });
}

void add_prepare_data(CLI::App& app)
{
    auto* sub = app.add_subcommand("prepare-data", "Resize faces, scale landmarks and materialize hull masks");
    json d = run_defaults();
    d["manifest"] = nullptr;
    d["size"] = 128;
    auto opts = std::make_shared<Options>(sub, d);
    sub->callback([opts] {
        const Run run("prepare-data", opts->resolve());
        const json& cfg = run.config();
        const int size = static_cast<int>(setting<long long>(cfg, "size"));
        if (size < 16) throw ConfigError("size must be at least 16");
        const DatasetManifest in = open_manifest(cfg);

        const fs::path root = run.dir("images");
        for (const char* sub_dir : {"images", "landmarks", "masks"}) {
            fs::create_directories(root / sub_dir);
        }
        std::vector<ManifestEntry> entries;
        json failures = json::array();
        std::set<std::string> used;
        for (const auto& e : in.entries()) {
            FaceRecord rec;
            try {
                rec = load_face_record(e.image, e.landmarks, size);
            } catch (const Error& ex) {
                failures.push_back({{"image", e.image.string()}, {"error", ex.what()}});
                continue;
            }
            std::string stem = e.image.stem().string();
            for (int k = 1; used.count(stem) != 0; ++k) {
                stem = e.image.stem().string() + "_" + std::to_string(k);
            }
            used.insert(stem);

            ManifestEntry out = e;
            out.image = root / "images" / (stem + ".png");
            io::write_png(out.image, to_u8(rec.image));
            if (e.landmarks) {
                out.landmarks = root / "landmarks" / (stem + ".json");
                write_landmarks(*out.landmarks, rec.landmarks);
            }
            io::write_png(root / "masks" / (stem + ".png"), rec.hull_mask);
            entries.push_back(std::move(out));
        }
        const fs::path manifest_out = root / "manifest.json";
        DatasetManifest(entries).save(manifest_out);
        write_json(run.dir("reports") / "prepare.json",
                   json{{"prepared", entries.size()}, {"failures", failures}, {"manifest", manifest_out.string()}});
        if (!failures.empty()) {
            std::string names;
            for (const auto& f : failures) {
                names += (names.empty() ? "" : ", ") + f["image"].get<std::string>();
            }
            throw IoError(std::to_string(failures.size()) + " file(s) could not be prepared: " + names);
        }
        log::info("prepared " + std::to_string(entries.size()) + " faces -> " + manifest_out.string());
    });
}

void add_detector_import(CLI::App& app)
{
    auto* group = app.add_subcommand("detector", "Manage detector checkpoints");
    group->require_subcommand(1);
    auto* sub = group->add_subcommand("import", "Register an external detector checkpoint under a name");
    json d = run_defaults();
    d["checkpoint"] = nullptr;
    d["name"] = nullptr;
    d["provenance"] = "";
    d["gradients"] = true;
    d["input_size"] = 0;
    auto opts = std::make_shared<Options>(sub, d);
    sub->callback([opts] {
        const Run run("detector-import", opts->resolve());
        const json& cfg = run.config();
        const fs::path src = setting<std::string>(cfg, "checkpoint");
        const auto name = setting<std::string>(cfg, "name");
        if (name.empty() || name.find('/') != std::string::npos) {
            throw ConfigError("detector name must be a non-empty plain name");
        }
        if (!fs::exists(src)) {
            throw PreconditionError("checkpoint " + src.string() + " not found");
        }
        Checkpoint ck = load_checkpoint(src);
        if (ck.kind != "detector") {
            throw ModelStateError("checkpoint " + src.string() + " holds a '" + ck.kind + "', not a detector");
        }
        const long long size = setting<long long>(cfg, "input_size");
        if (size > 0) {
            ck.metadata["input_size"] = size;
        }
        if (!ck.metadata.contains("input_size")) {
            throw ConfigError("checkpoint has no recorded input size; pass --input-size");
        }
        json provenance = ck.metadata.value("provenance", json::object());
        const auto extra = setting<std::string>(cfg, "provenance");
        if (!extra.empty()) {
            try {
                provenance["import"] = json::parse(extra);
            } catch (const json::exception&) {
                provenance["import"] = extra;
            }
        }
        provenance["imported_from"] = src.string();
        ck.metadata["provenance"] = provenance;
        ck.metadata["name"] = name;
        ck.metadata["gradients"] = setting<bool>(cfg, "gradients");

        const fs::path dst = run.dir("checkpoints") / (name + ".ckpt");
        save_checkpoint(dst, ck);
        const DetectorHandle check = DetectorHandle::load(dst);  // refuses malformed weights
        register_detector(run.out(), name, dst);
        log::info("registered detector '" + check.name() + "' -> " + dst.string());
    });
}

}  // namespace

void add_data_commands(CLI::App& app)
{
    add_synth_corpus(app);
    add_prepare_data(app);
    add_detector_import(app);
}

}  // namespace camo::cli
