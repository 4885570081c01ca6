#include "camo/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "camo/camouflage.hpp"
#include "camo/error.hpp"
#include "camo/image_io.hpp"
#include "camo/random.hpp"

namespace camo::synth {

namespace {

using Rgb = std::array<double, 3>;

struct Canvas {
    int size;
    ImageF img;

    explicit Canvas(int s) : size(s), img(s, s) {}

    // Continuous coordinates in [0, 1] of pixel centers.
    double u(int x) const { return (x + 0.5) / size; }

    void paint(int y, int x, const Rgb& c, double alpha)
    {
        if (alpha <= 0.0) return;
        alpha = std::min(alpha, 1.0);
        for (int k = 0; k < 3; ++k) {
            img.at(y, x, k) = img.at(y, x, k) * (1.0 - alpha) + c[static_cast<std::size_t>(k)] * alpha;
        }
    }
};

/// Rotated ellipse in normalized coordinates.
struct Ellipse {
    double cx, cy, a, b, angle;

    // Approximate signed distance in pixels (negative inside).
    double sdf(double u, double v, int size) const
    {
        const double c = std::cos(angle), s = std::sin(angle);
        const double dx = u - cx, dy = v - cy;
        const double lx = c * dx + s * dy;
        const double ly = -s * dx + c * dy;
        const double r = std::sqrt((lx / a) * (lx / a) + (ly / b) * (ly / b));
        return (r - 1.0) * std::min(a, b) * size;
    }

    // Local coordinates scaled by the semi-axes.
    std::pair<double, double> local(double u, double v) const
    {
        const double c = std::cos(angle), s = std::sin(angle);
        const double dx = u - cx, dy = v - cy;
        return {(c * dx + s * dy) / a, (-s * dx + c * dy) / b};
    }

    std::pair<double, double> to_global(double lx, double ly) const
    {
        const double c = std::cos(angle), s = std::sin(angle);
        const double gx = lx * a, gy = ly * b;
        return {cx + c * gx - s * gy, cy + s * gx + c * gy};
    }
};

double coverage(double sdf_px) { return std::clamp(0.5 - sdf_px, 0.0, 1.0); }

Rgb jitter(const Rgb& c, Rng& rng, double amount)
{
    Rgb out;
    for (std::size_t k = 0; k < 3; ++k) {
        out[k] = std::clamp(c[k] + rng.uniform(-amount, amount), 0.0, 1.0);
    }
    return out;
}

Rgb pick(const std::vector<Rgb>& palette, Rng& rng) { return palette[rng.below(palette.size())]; }

/// Smooth random field: bilinear upsampling of a coarse normal grid.
Plane smooth_field(int size, int grid, Rng& rng)
{
    std::vector<double> g(static_cast<std::size_t>((grid + 1) * (grid + 1)));
    for (double& v : g) v = rng.normal();
    Plane out(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double fx = (x + 0.5) / size * grid;
            const double fy = (y + 0.5) / size * grid;
            const int ix = std::min(static_cast<int>(fx), grid - 1);
            const int iy = std::min(static_cast<int>(fy), grid - 1);
            const double tx = fx - ix, ty = fy - iy;
            auto at = [&](int yy, int xx) { return g[static_cast<std::size_t>(yy * (grid + 1) + xx)]; };
            out.at(y, x) = (1 - ty) * ((1 - tx) * at(iy, ix) + tx * at(iy, ix + 1)) +
                           ty * ((1 - tx) * at(iy + 1, ix) + tx * at(iy + 1, ix + 1));
        }
    }
    return out;
}

const std::vector<Rgb> kSkin = {{0.96, 0.80, 0.69}, {0.92, 0.72, 0.58}, {0.84, 0.63, 0.50},
                                {0.74, 0.53, 0.40}, {0.60, 0.42, 0.30}, {0.45, 0.31, 0.22},
                                {0.98, 0.86, 0.76}};
const std::vector<Rgb> kHair = {{0.10, 0.07, 0.05}, {0.25, 0.16, 0.09}, {0.45, 0.30, 0.16},
                                {0.75, 0.62, 0.38}, {0.55, 0.22, 0.10}, {0.35, 0.35, 0.35}};
const std::vector<Rgb> kIris = {{0.30, 0.20, 0.12}, {0.20, 0.35, 0.55}, {0.30, 0.45, 0.30},
                                {0.15, 0.10, 0.08}};
const std::vector<Rgb> kCloth = {{0.15, 0.20, 0.45}, {0.60, 0.10, 0.12}, {0.85, 0.85, 0.82},
                                 {0.12, 0.12, 0.12}, {0.30, 0.50, 0.30}, {0.70, 0.55, 0.30}};

}  // namespace

SyntheticFace render_face(int size, std::uint64_t seed, std::uint64_t index)
{
    if (size < 32) {
        throw ParameterError("synthetic faces need size >= 32");
    }
    Rng rng(mix_seed(seed, index), 0x5f);
    Canvas cv(size);

    // Background: tinted vertical gradient with soft blobs and mottling.
    const Rgb bg_top = {rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9)};
    const Rgb bg_bot = jitter(bg_top, rng, 0.25);
    const Plane mottle = smooth_field(size, 6, rng);
    const double mottle_amp = rng.uniform(0.02, 0.06);
    for (int y = 0; y < size; ++y) {
        const double t = cv.u(y);
        for (int x = 0; x < size; ++x) {
            for (int k = 0; k < 3; ++k) {
                cv.img.at(y, x, k) = (1 - t) * bg_top[static_cast<std::size_t>(k)] +
                                     t * bg_bot[static_cast<std::size_t>(k)] + mottle_amp * mottle.at(y, x);
            }
        }
    }
    const int blobs = 2 + static_cast<int>(rng.below(4));
    for (int i = 0; i < blobs; ++i) {
        const Ellipse e{rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.05, 0.25),
                        rng.uniform(0.05, 0.25), rng.uniform(0, std::numbers::pi)};
        const Rgb col = jitter(bg_top, rng, 0.3);
        const double soft = rng.uniform(2.0, 10.0);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                cv.paint(y, x, col, 0.6 * std::clamp(0.5 - e.sdf(cv.u(x), cv.u(y), size) / soft, 0.0, 1.0));
            }
        }
    }

    // Face geometry.
    const Ellipse face{0.5 + rng.uniform(-0.04, 0.04), 0.50 + rng.uniform(-0.03, 0.04),
                       rng.uniform(0.25, 0.31), rng.uniform(0.33, 0.39), rng.uniform(-0.12, 0.12)};
    const Rgb skin = jitter(pick(kSkin, rng), rng, 0.04);
    const Rgb hair = jitter(pick(kHair, rng), rng, 0.04);
    const Rgb cloth = jitter(pick(kCloth, rng), rng, 0.08);

    // Shoulders and neck.
    const Ellipse shoulders{face.cx + rng.uniform(-0.03, 0.03), 1.12, rng.uniform(0.45, 0.6), 0.32, 0.0};
    const double neck_half = face.a * rng.uniform(0.45, 0.6);
    const Rgb neck_col = {skin[0] * 0.85, skin[1] * 0.85, skin[2] * 0.85};
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = cv.u(x), v = cv.u(y);
            if (v > face.cy) {
                const double d = (std::abs(u - face.cx) - neck_half) * size;
                cv.paint(y, x, neck_col, coverage(d));
            }
            cv.paint(y, x, cloth, coverage(shoulders.sdf(u, v, size)));
        }
    }

    // Hair mass behind the face.
    const Ellipse hair_back{face.cx, face.cy - face.b * rng.uniform(0.12, 0.25), face.a * rng.uniform(1.08, 1.22),
                            face.b * rng.uniform(0.92, 1.05), face.angle};
    const Plane hair_tex = smooth_field(size, 24, rng);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = cv.u(x), v = cv.u(y);
            if (v < face.cy + face.b * 0.2) {
                Rgb c = hair;
                for (auto& ch : c) ch = std::clamp(ch + 0.05 * hair_tex.at(y, x), 0.0, 1.0);
                cv.paint(y, x, c, coverage(hair_back.sdf(u, v, size)));
            }
        }
    }

    // Face with directional shading.
    const double light = rng.uniform(-0.6, 0.6);
    const Plane skin_tex = smooth_field(size, 20, rng);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = cv.u(x), v = cv.u(y);
            const double cov = coverage(face.sdf(u, v, size));
            if (cov <= 0.0) continue;
            const auto [lx, ly] = face.local(u, v);
            const double r2 = std::min(lx * lx + ly * ly, 1.0);
            const double nz = std::sqrt(1.0 - r2);
            const double shade = 0.78 + 0.22 * nz + 0.10 * light * lx + 0.02 * skin_tex.at(y, x);
            Rgb c;
            for (std::size_t k = 0; k < 3; ++k) c[k] = std::clamp(skin[k] * shade, 0.0, 1.0);
            cv.paint(y, x, c, cov);
        }
    }

    // Fringe of hair over the forehead.
    const double fringe = rng.uniform(-0.95, -0.7);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double u = cv.u(x), v = cv.u(y);
            const auto [lx, ly] = face.local(u, v);
            const double wave = 0.06 * std::sin(lx * 9.0 + light * 3.0);
            const double d = (ly - (fringe + wave)) * face.b * size;
            const double inside_face = coverage(face.sdf(u, v, size));
            cv.paint(y, x, hair, inside_face * coverage(d));
        }
    }

    auto feature = [&](double lx, double ly, double ra, double rb, const Rgb& col, double alpha) {
        const auto [gx, gy] = face.to_global(lx, ly);
        const Ellipse e{gx, gy, ra * face.a, rb * face.b, face.angle};
        const int x0 = std::max(0, static_cast<int>((gx - ra * face.a * 1.5 - 0.02) * size));
        const int x1 = std::min(size - 1, static_cast<int>((gx + ra * face.a * 1.5 + 0.02) * size));
        const int y0 = std::max(0, static_cast<int>((gy - rb * face.b * 1.5 - 0.02) * size));
        const int y1 = std::min(size - 1, static_cast<int>((gy + rb * face.b * 1.5 + 0.02) * size));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                cv.paint(y, x, col, alpha * coverage(e.sdf(cv.u(x), cv.u(y), size)));
            }
        }
    };

    // Eyes, brows, nose, mouth.
    const double eye_y = rng.uniform(-0.22, -0.10);
    const double eye_dx = rng.uniform(0.34, 0.42);
    const Rgb iris = pick(kIris, rng);
    const Rgb brow = {hair[0] * 0.8, hair[1] * 0.8, hair[2] * 0.8};
    for (double side : {-1.0, 1.0}) {
        const double ex = side * eye_dx;
        feature(ex, eye_y, 0.17, 0.07, {0.93, 0.92, 0.90}, 1.0);
        feature(ex, eye_y, 0.075, 0.065, iris, 1.0);
        feature(ex, eye_y, 0.035, 0.03, {0.03, 0.03, 0.03}, 1.0);
        feature(ex + 0.02, eye_y - 0.02, 0.012, 0.01, {1.0, 1.0, 1.0}, 0.9);
        feature(ex, eye_y - rng.uniform(0.14, 0.19), 0.2, 0.03, brow, 0.9);
    }
    const Rgb nose_shadow = {skin[0] * 0.75, skin[1] * 0.72, skin[2] * 0.7};
    feature(0.03 * light, 0.18, 0.05, 0.16, nose_shadow, 0.35);
    feature(-0.07, 0.30, 0.035, 0.02, {skin[0] * 0.45, skin[1] * 0.4, skin[2] * 0.4}, 0.8);
    feature(0.07, 0.30, 0.035, 0.02, {skin[0] * 0.45, skin[1] * 0.4, skin[2] * 0.4}, 0.8);
    const double mouth_w = rng.uniform(0.24, 0.36);
    const Rgb lip = {std::min(1.0, skin[0] * 0.95 + 0.05), skin[1] * 0.6, skin[2] * 0.6};
    feature(0.0, 0.52, mouth_w, 0.07, lip, 0.9);
    feature(0.0, 0.52, mouth_w * 0.9, 0.012, {0.25, 0.08, 0.08}, 0.9);

    // Skin pores: fine grain confined to the face.
    const double pore_amp = rng.uniform(0.006, 0.014);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double cov = coverage(face.sdf(cv.u(x), cv.u(y), size));
            const double n = rng.normal() * pore_amp * cov;
            for (int k = 0; k < 3; ++k) cv.img.at(y, x, k) += n;
        }
    }

    // Optical blur of the lens, then sensor noise over the whole frame.
    cv.img = gaussian_filter(cv.img, 3, rng.uniform(0.4, 0.7));
    const double sensor = rng.uniform(0.008, 0.016);
    const double chroma = rng.uniform(0.2, 0.5);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double l = rng.normal() * sensor;
            for (int k = 0; k < 3; ++k) {
                cv.img.at(y, x, k) += l + chroma * sensor * rng.normal();
            }
        }
    }
    clamp_unit(cv.img.values());

    // Facial contour: points on the face ellipse, jaw densely, forehead sparsely.
    SyntheticFace out;
    out.image = to_u8(cv.img);
    const int jaw = 17;
    for (int i = 0; i < jaw; ++i) {
        const double t = -0.15 * std::numbers::pi + (1.3 * std::numbers::pi) * i / (jaw - 1);
        const auto [gx, gy] = face.to_global(std::cos(t) * 0.98, std::sin(t) * 0.98);
        out.contour.push_back({std::clamp(gx * size - 0.5, 0.0, size - 1.0),
                               std::clamp(gy * size - 0.5, 0.0, size - 1.0)});
    }
    const int top = 10;
    for (int i = 1; i < top; ++i) {
        const double t = 1.15 * std::numbers::pi + (0.7 * std::numbers::pi) * i / top;
        const auto [gx, gy] = face.to_global(std::cos(t) * 0.98, std::sin(t) * 0.98);
        out.contour.push_back({std::clamp(gx * size - 0.5, 0.0, size - 1.0),
                               std::clamp(gy * size - 0.5, 0.0, size - 1.0)});
    }
    return out;
}

namespace {

std::uint64_t face_index(Split split, int i)
{
    return (split == Split::train ? 0ull : 1000000ull) + static_cast<std::uint64_t>(i);
}

}  // namespace

std::filesystem::path write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec)
{
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "landmarks");
    std::vector<ManifestEntry> entries;
    for (Split split : {Split::train, Split::test}) {
        const int n = split == Split::train ? spec.train_reals : spec.test_reals;
        for (int i = 0; i < n; ++i) {
            const auto face = render_face(spec.size, spec.seed, face_index(split, i));
            const std::string stem = to_string(split) + "_" + std::to_string(i);
            const auto img_path = dir / "images" / (stem + ".png");
            const auto lm_path = dir / "landmarks" / (stem + ".json");
            io::write_png(img_path, face.image);
            write_landmarks(lm_path, face.contour);
            entries.push_back({img_path, lm_path, split, Label::real});
        }
    }
    const auto manifest_path = dir / "manifest.json";
    DatasetManifest(std::move(entries)).save(manifest_path);
    return manifest_path;
}

std::vector<FaceRecord> make_records(const CorpusSpec& spec, Split split)
{
    const int n = split == Split::train ? spec.train_reals : spec.test_reals;
    std::vector<FaceRecord> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto face = render_face(spec.size, spec.seed, face_index(split, i));
        out.push_back(make_face_record(to_float(face.image), std::move(face.contour),
                                       to_string(split) + "_" + std::to_string(i)));
    }
    return out;
}

}  // namespace camo::synth
