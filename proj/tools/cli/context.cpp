#include "context.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "camo/log.hpp"

namespace camo::cli {

Options::Options(CLI::App* app, json defaults)
    : app_(app), defaults_(std::move(defaults)), config_path_(std::make_shared<std::string>())
{
    app_->add_option("--config", *config_path_, "JSON file of settings; flags override its values");
    for (const auto& [key, value] : defaults_.items()) {
        if (value.is_boolean()) {
            add<bool>(key, "");
        } else if (value.is_number_unsigned() && key == "seed") {
            add<std::uint64_t>(key, "");
        } else if (value.is_number_integer()) {
            add<long long>(key, "");
        } else if (value.is_number()) {
            add<double>(key, "");
        } else if (value.is_array() && (value.empty() || value[0].is_string())) {
            add<std::vector<std::string>>(key, "");
        } else if (value.is_array()) {
            add<std::vector<double>>(key, "");
        } else {
            add<std::string>(key, "");
        }
    }
}

std::string Options::flag_name(std::string key)
{
    for (char& c : key) {
        if (c == '_') c = '-';
    }
    return key;
}

json Options::resolve() const
{
    json cfg = defaults_;
    if (!config_path_->empty()) {
        json file;
        try {
            file = read_json(*config_path_);
        } catch (const IoError& e) {
            throw ConfigError(e.what());
        }
        if (!file.is_object()) {
            throw ConfigError("config file must hold a JSON object: " + *config_path_);
        }
        for (const auto& [key, value] : file.items()) {
            if (!defaults_.contains(key)) {
                throw ConfigError("unknown config key '" + key + "' in " + *config_path_);
            }
            cfg[key] = value;
        }
    }
    if (const char* env = std::getenv("CAMO_SEED"); env != nullptr && *env != '\0') {
        try {
            std::size_t used = 0;
            const unsigned long long s = std::stoull(env, &used);
            if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
            cfg["seed"] = static_cast<std::uint64_t>(s);
        } catch (const std::exception&) {
            throw ConfigError(std::string("CAMO_SEED is not an unsigned integer: ") + env);
        }
    }
    for (const auto& apply : apply_) {
        apply(cfg);
    }
    return cfg;
}

namespace {

std::string hex_digest(const std::string& s)
{
    std::uint64_t v = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        v ^= c;
        v *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(8);
    os.fill('0');
    os << (v & 0xffffffffULL);
    return os.str();
}

}  // namespace

void apply_log_level(const json& cfg)
{
    const auto lv = cfg.value("log_level", std::string("info"));
    if (lv == "debug") log::set_level(log::Level::debug);
    else if (lv == "info") log::set_level(log::Level::info);
    else if (lv == "warn") log::set_level(log::Level::warn);
    else if (lv == "error") log::set_level(log::Level::error);
    else if (lv == "off") log::set_level(log::Level::off);
    else throw ConfigError("log_level must be debug|info|warn|error|off, got '" + lv + "'");
}

Run::Run(std::string command, json config) : command_(std::move(command)), config_(std::move(config))
{
    apply_log_level(config_);
    out_ = setting<std::string>(config_, "out");
    std::string id = config_.value("run_id", std::string{});
    if (id.empty()) {
        json keyed = config_;
        keyed.erase("run_id");
        keyed.erase("out");
        keyed.erase("log_level");
        id = command_ + "-" + hex_digest(command_ + keyed.dump());
        config_["run_id"] = id;
    }
    if (id.find('/') != std::string::npos || id == "." || id == "..") {
        throw ConfigError("run_id must be a plain directory name, got '" + id + "'");
    }
    id_ = id;
    const json echo = {{"command", command_}, {"config", config_}, {"seed", seed()}};
    for (const char* kind : {"checkpoints", "images", "reports", "logs"}) {
        fs::create_directories(dir(kind));
        write_json(dir(kind) / "run_config.json", echo);
    }
    log::info(command_ + ": run " + id_ + " under " + out_.string());
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json read_json(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

json run_defaults()
{
    return json{{"out", "runs"}, {"run_id", ""}, {"seed", std::uint64_t{1}}, {"log_level", "info"}};
}

DatasetManifest open_manifest(const json& cfg)
{
    const fs::path path = setting<std::string>(cfg, "manifest");
    if (!fs::exists(path)) {
        throw PreconditionError("manifest " + path.string() +
                                " not found; create one with `camo synth-corpus` or `camo prepare-data`");
    }
    return DatasetManifest::load(path);
}

Split parse_split_setting(const json& cfg)
{
    const auto s = setting<std::string>(cfg, "split");
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw ConfigError("split must be train|test, got '" + s + "'");
}

std::vector<FaceRecord> load_reals(const DatasetManifest& manifest, const json& cfg, Split split)
{
    const int size = static_cast<int>(setting<long long>(cfg, "size"));
    auto entries = manifest.select(split, Label::real);
    const long long limit = cfg.value("limit", 0LL);
    if (limit > 0 && static_cast<std::size_t>(limit) < entries.size()) {
        entries.resize(static_cast<std::size_t>(limit));
    }
    std::vector<FaceRecord> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        out.push_back(load_face_record(e.image, e.landmarks, size));
    }
    if (out.empty()) {
        throw PreconditionError("manifest has no real faces in the " + to_string(split) + " split");
    }
    return out;
}

namespace {

fs::path registry_path(const fs::path& out) { return out / "checkpoints" / "registry.json"; }

}  // namespace

void register_detector(const fs::path& out, const std::string& name, const fs::path& checkpoint)
{
    const fs::path reg = registry_path(out);
    json j = fs::exists(reg) ? read_json(reg) : json::object();
    j[name] = fs::relative(checkpoint, out).generic_string();
    fs::create_directories(reg.parent_path());
    write_json(reg, j);
}

DetectorHandle open_detector(const std::string& ref, const fs::path& out)
{
    if (fs::exists(ref)) {
        return DetectorHandle::load(ref);
    }
    const fs::path reg = registry_path(out);
    if (fs::exists(reg)) {
        const json j = read_json(reg);
        if (j.contains(ref)) {
            return DetectorHandle::load(out / j[ref].get<std::string>());
        }
    }
    throw PreconditionError("detector '" + ref + "' is neither a checkpoint file nor a registered name; " +
                            "train one with `camo train-detector` or register one with `camo detector import`");
}

GeneratorModel open_generator(const json& cfg)
{
    const fs::path path = setting<std::string>(cfg, "generator");
    if (!fs::exists(path)) {
        throw PreconditionError("generator checkpoint " + path.string() + " not found; produce it with `camo train`");
    }
    return GeneratorModel::load(path);
}

int run(int argc, const char* const* argv)
{
    CLI::App app{"camo: train and evaluate detector-spoofing face camouflage"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every command");
    add_data_commands(app);
    add_train_commands(app);
    add_eval_commands(app);
    try {
        app.parse(argc, argv);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const Error& e) {
        log::error(e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        log::error(e.what());
        return 4;
    }
}

}  // namespace camo::cli
