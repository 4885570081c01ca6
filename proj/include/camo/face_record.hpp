#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "camo/geometry.hpp"
#include "camo/image.hpp"

namespace camo {

enum class Split { train, test };
enum class Label { fake = 0, real = 1 };

/// One face: working-form image, facial-contour landmarks and the hull mask
/// the camouflage is confined to.
struct FaceRecord {
    ImageF image;
    std::vector<Point> landmarks;
    BinaryMask hull_mask;
    std::string source_id;
    bool fallback_mask = false;
};

/// Builds the hull mask from landmarks, or the fallback ellipse (with a
/// warning) when fewer than three landmarks are available.
FaceRecord make_face_record(ImageF image, std::vector<Point> landmarks, std::string source_id);

/// Throws DomainError naming the first landmark outside [0, W-1] x [0, H-1].
void check_landmarks_in_bounds(std::span<const Point> landmarks, int height, int width);

/// Parses a JSON array of [x, y] pairs.
std::vector<Point> read_landmarks(const std::filesystem::path& path);
void write_landmarks(const std::filesystem::path& path, std::span<const Point> landmarks);

/// Scales landmark coordinates for a resize from (h0, w0) to (h1, w1).
std::vector<Point> scale_landmarks(std::span<const Point> landmarks, int h0, int w0, int h1, int w1);

/// Loads and decodes an image, bilinear-resizes it to `size` x `size` when
/// `size` > 0, and scales the landmarks accordingly.
FaceRecord load_face_record(const std::filesystem::path& image_path,
                            const std::optional<std::filesystem::path>& landmarks_path, int size = 0);

struct ManifestEntry {
    std::filesystem::path image;
    std::optional<std::filesystem::path> landmarks;
    Split split = Split::train;
    Label label = Label::real;
};

/// Immutable list of dataset entries. Relative paths are resolved against
/// the manifest's directory when loaded.
class DatasetManifest {
public:
    DatasetManifest() = default;
    explicit DatasetManifest(std::vector<ManifestEntry> entries);

    static DatasetManifest load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    const std::vector<ManifestEntry>& entries() const noexcept { return entries_; }
    std::vector<ManifestEntry> select(Split split, Label label) const;
    std::size_t count(Split split, Label label) const;

private:
    std::vector<ManifestEntry> entries_;
};

std::string to_string(Split s);
std::string to_string(Label l);

/// Loads every entry matching (split, label), in manifest order.
std::vector<FaceRecord> load_records(const DatasetManifest& manifest, Split split, Label label,
                                     int size = 0);

}  // namespace camo
