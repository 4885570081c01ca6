#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "camo/discriminators.hpp"
#include "camo/error.hpp"
#include "camo/face_record.hpp"
#include "camo/generator.hpp"

namespace camo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Command settings with one flag per config key (`max_steps` <-> `--max-steps`).
/// Resolution order, lowest first: defaults, --config file, CAMO_SEED, flags.
class Options {
public:
    Options(CLI::App* app, json defaults);

    template <typename T>
    void add(const std::string& key, const std::string& help)
    {
        auto slot = std::make_shared<std::optional<T>>();
        app_->add_option("--" + flag_name(key), *slot, help);
        apply_.push_back([slot, key](json& j) {
            if (*slot) j[key] = **slot;
        });
    }

    json resolve() const;

    static std::string flag_name(std::string key);

private:
    CLI::App* app_;
    json defaults_;
    std::shared_ptr<std::string> config_path_;
    std::vector<std::function<void(json&)>> apply_;
};

/// Typed read of a resolved setting; ConfigError when missing or mistyped.
template <typename T>
T setting(const json& cfg, const std::string& key)
{
    if (!cfg.contains(key) || cfg[key].is_null()) {
        throw ConfigError("missing required setting '" + key + "' (flag --" + Options::flag_name(key) +
                          " or config key)");
    }
    try {
        return cfg[key].get<T>();
    } catch (const json::exception&) {
        throw ConfigError("setting '" + key + "' has the wrong type: " + cfg[key].dump());
    }
}

/// One invocation's output area: out/{checkpoints,images,reports,logs}/<run-id>/.
class Run {
public:
    Run(std::string command, json config);

    const json& config() const noexcept { return config_; }
    const std::string& id() const noexcept { return id_; }
    std::uint64_t seed() const { return setting<std::uint64_t>(config_, "seed"); }
    fs::path dir(const std::string& kind) const { return out_ / kind / id_; }
    const fs::path& out() const noexcept { return out_; }

private:
    std::string command_;
    json config_;
    fs::path out_;
    std::string id_;
};

void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

void apply_log_level(const json& cfg);

/// Settings shared by every run-producing command.
json run_defaults();

/// The manifest named by `manifest`, or a PreconditionError telling how to make one.
DatasetManifest open_manifest(const json& cfg);

/// Real faces of the configured split, at `size` (0 keeps the stored size),
/// truncated to `limit` when positive.
std::vector<FaceRecord> load_reals(const DatasetManifest& manifest, const json& cfg, Split split);
Split parse_split_setting(const json& cfg);

/// `ref` is a checkpoint path or a name registered under out/checkpoints/registry.json.
DetectorHandle open_detector(const std::string& ref, const fs::path& out);
GeneratorModel open_generator(const json& cfg);

void register_detector(const fs::path& out, const std::string& name, const fs::path& checkpoint);

void add_data_commands(CLI::App& app);
void add_train_commands(CLI::App& app);
void add_eval_commands(CLI::App& app);

/// Parses and runs one command line; returns the process exit status.
int run(int argc, const char* const* argv);

}  // namespace camo::cli
