#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "camo/face_record.hpp"
#include "camo/geometry.hpp"
#include "camo/image.hpp"

namespace camo::synth {

/// A procedurally rendered aligned face crop with its contour landmarks.
struct SyntheticFace {
    ImageU8 image;
    std::vector<Point> contour;
};

/// Renders face `index` of the corpus identified by `seed`. The image carries
/// one sensor-noise level across the whole frame, so any locally processed
/// region is statistically inconsistent with its surroundings.
SyntheticFace render_face(int size, std::uint64_t seed, std::uint64_t index);

struct CorpusSpec {
    int size = 128;
    int train_reals = 500;
    int test_reals = 150;
    std::uint64_t seed = 1;
};

/// Writes PNG images, landmark JSON files and manifest.json under `dir`,
/// returning the manifest path. Train entries come first.
std::filesystem::path write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec);

/// Same faces as write_corpus, built in memory (after the 8-bit round trip).
std::vector<FaceRecord> make_records(const CorpusSpec& spec, Split split);

}  // namespace camo::synth
