#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "camo/geometry.hpp"
#include "camo/image.hpp"
#include "camo/random.hpp"

namespace testing {

inline camo::ImageF random_image(camo::Rng& rng, int h, int w)
{
    camo::ImageF img(h, w);
    for (double& v : img.values()) v = rng.uniform();
    return img;
}

inline camo::ImageF constant_image(int h, int w, double v) { return camo::ImageF(h, w, v); }

inline camo::BinaryMask square_mask(int size, int lo, int hi)
{
    camo::BinaryMask m(size, size, 0);
    for (int y = lo; y < hi; ++y)
        for (int x = lo; x < hi; ++x) m.at(y, x) = 1;
    return m;
}

inline std::vector<camo::Point> random_points(camo::Rng& rng, std::size_t n, double lo, double hi)
{
    std::vector<camo::Point> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi)});
    return pts;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("camo_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
