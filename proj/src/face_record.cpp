#include "camo/face_record.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "camo/error.hpp"
#include "camo/image_io.hpp"
#include "camo/log.hpp"

namespace camo {

using nlohmann::json;

FaceRecord make_face_record(ImageF image, std::vector<Point> landmarks, std::string source_id)
{
    check_landmarks_in_bounds(landmarks, image.height(), image.width());
    FaceRecord rec;
    if (landmarks.size() < 3) {
        log::warn("record '" + source_id + "' has " + std::to_string(landmarks.size()) +
                  " landmarks; using fallback ellipse mask");
        rec.hull_mask = fallback_ellipse_mask(image.height(), image.width());
        rec.fallback_mask = true;
    } else {
        const auto hull = convex_hull(landmarks);
        rec.hull_mask = rasterize_hull(hull, image.height(), image.width());
    }
    rec.image = std::move(image);
    rec.landmarks = std::move(landmarks);
    rec.source_id = std::move(source_id);
    return rec;
}

void check_landmarks_in_bounds(std::span<const Point> landmarks, int height, int width)
{
    for (std::size_t i = 0; i < landmarks.size(); ++i) {
        const Point& p = landmarks[i];
        if (!(p.x >= 0.0 && p.x <= width - 1 && p.y >= 0.0 && p.y <= height - 1)) {
            throw DomainError("landmark " + std::to_string(i) + " (" + std::to_string(p.x) + ", " +
                              std::to_string(p.y) + ") lies outside the " + std::to_string(width) +
                              "x" + std::to_string(height) + " image");
        }
    }
}

std::vector<Point> read_landmarks(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open landmarks: " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("malformed landmarks JSON " + path.string() + ": " + e.what());
    }
    if (!j.is_array()) {
        throw IoError("landmarks JSON must be an array of [x, y]: " + path.string());
    }
    std::vector<Point> pts;
    pts.reserve(j.size());
    for (const auto& item : j) {
        if (!item.is_array() || item.size() != 2 || !item[0].is_number() || !item[1].is_number()) {
            throw IoError("landmark entries must be [x, y] numbers: " + path.string());
        }
        pts.push_back({item[0].get<double>(), item[1].get<double>()});
    }
    return pts;
}

void write_landmarks(const std::filesystem::path& path, std::span<const Point> landmarks)
{
    json j = json::array();
    for (const Point& p : landmarks) {
        j.push_back({p.x, p.y});
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write landmarks: " + path.string());
    }
    out << j.dump() << '\n';
}

std::vector<Point> scale_landmarks(std::span<const Point> landmarks, int h0, int w0, int h1, int w1)
{
    // Half-pixel-center convention, matching the bilinear resize.
    const double sx = static_cast<double>(w1) / w0;
    const double sy = static_cast<double>(h1) / h0;
    std::vector<Point> out;
    out.reserve(landmarks.size());
    for (const Point& p : landmarks) {
        out.push_back({std::clamp((p.x + 0.5) * sx - 0.5, 0.0, w1 - 1.0),
                       std::clamp((p.y + 0.5) * sy - 0.5, 0.0, h1 - 1.0)});
    }
    return out;
}

FaceRecord load_face_record(const std::filesystem::path& image_path,
                            const std::optional<std::filesystem::path>& landmarks_path, int size)
{
    ImageU8 raw = io::read_image(image_path);
    std::vector<Point> landmarks;
    if (landmarks_path) {
        landmarks = read_landmarks(*landmarks_path);
        check_landmarks_in_bounds(landmarks, raw.height(), raw.width());
    }
    if (size > 0 && (raw.height() != size || raw.width() != size)) {
        landmarks = scale_landmarks(landmarks, raw.height(), raw.width(), size, size);
        raw = io::resize_bilinear(raw, size, size);
    }
    return make_face_record(to_float(raw), std::move(landmarks), image_path.stem().string());
}

DatasetManifest::DatasetManifest(std::vector<ManifestEntry> entries) : entries_(std::move(entries)) {}

namespace {

Split parse_split(const std::string& s)
{
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw ConfigError("manifest split must be 'train' or 'test', got '" + s + "'");
}

Label parse_label(const std::string& s)
{
    if (s == "real") return Label::real;
    if (s == "fake") return Label::fake;
    throw ConfigError("manifest label must be 'real' or 'fake', got '" + s + "'");
}

}  // namespace

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }
std::string to_string(Label l) { return l == Label::real ? "real" : "fake"; }

DatasetManifest DatasetManifest::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open manifest: " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed manifest " + path.string() + ": " + e.what());
    }
    if (!j.contains("entries") || !j["entries"].is_array()) {
        throw ConfigError("manifest must contain an 'entries' array: " + path.string());
    }
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };
    std::vector<ManifestEntry> entries;
    for (const auto& e : j["entries"]) {
        ManifestEntry me;
        try {
            me.image = resolve(e.at("image").get<std::string>());
            if (e.contains("landmarks") && !e["landmarks"].is_null()) {
                me.landmarks = resolve(e["landmarks"].get<std::string>());
            }
            me.split = parse_split(e.at("split").get<std::string>());
            me.label = parse_label(e.at("label").get<std::string>());
        } catch (const json::exception& ex) {
            throw ConfigError("bad manifest entry in " + path.string() + ": " + ex.what());
        }
        if (!std::filesystem::exists(me.image)) {
            throw PreconditionError("manifest image does not exist: " + me.image.string());
        }
        if (me.landmarks && !std::filesystem::exists(*me.landmarks)) {
            throw PreconditionError("manifest landmarks do not exist: " + me.landmarks->string());
        }
        entries.push_back(std::move(me));
    }
    return DatasetManifest(std::move(entries));
}

void DatasetManifest::save(const std::filesystem::path& path) const
{
    const auto base = path.parent_path();
    auto rel = [&](const std::filesystem::path& p) {
        auto r = std::filesystem::proximate(p, base.empty() ? "." : base);
        return r.generic_string();
    };
    json arr = json::array();
    for (const auto& e : entries_) {
        json item;
        item["image"] = rel(e.image);
        item["landmarks"] = e.landmarks ? json(rel(*e.landmarks)) : json(nullptr);
        item["split"] = to_string(e.split);
        item["label"] = to_string(e.label);
        arr.push_back(std::move(item));
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write manifest: " + path.string());
    }
    out << json{{"entries", arr}}.dump(2) << '\n';
}

std::vector<ManifestEntry> DatasetManifest::select(Split split, Label label) const
{
    std::vector<ManifestEntry> out;
    for (const auto& e : entries_) {
        if (e.split == split && e.label == label) {
            out.push_back(e);
        }
    }
    return out;
}

std::size_t DatasetManifest::count(Split split, Label label) const
{
    std::size_t n = 0;
    for (const auto& e : entries_) {
        n += (e.split == split && e.label == label) ? 1 : 0;
    }
    return n;
}

std::vector<FaceRecord> load_records(const DatasetManifest& manifest, Split split, Label label, int size)
{
    std::vector<FaceRecord> out;
    for (const auto& e : manifest.select(split, label)) {
        out.push_back(load_face_record(e.image, e.landmarks, size));
    }
    return out;
}

}  // namespace camo
