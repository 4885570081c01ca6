#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "camo/error.hpp"
#include "camo/face_record.hpp"
#include "camo/geometry.hpp"
#include "camo/image_io.hpp"
#include "camo/synth.hpp"
#include "camo_ref/reference.hpp"
#include "support.hpp"

using namespace camo;

namespace {

bool same_vertex_set(std::vector<Point> a, std::vector<Point> b)
{
    auto less = [](const Point& p, const Point& q) { return p.x < q.x || (p.x == q.x && p.y < q.y); };
    std::sort(a.begin(), a.end(), less);
    std::sort(b.begin(), b.end(), less);
    return a == b;
}

}  // namespace

TEST_CASE("convex hull examples")
{
    const std::vector<Point> square{{0, 0}, {10, 0}, {10, 10}, {0, 10}, {5, 5}};
    const auto h = convex_hull(square);
    CHECK(h.size() == 4);
    CHECK(same_vertex_set(h, {{0, 0}, {10, 0}, {10, 10}, {0, 10}}));
    CHECK(signed_area2(h) > 0.0);

    const std::vector<Point> tri{{1, 1}, {8, 2}, {3, 9}};
    CHECK(same_vertex_set(convex_hull(tri), tri));

    CHECK_THROWS_AS(convex_hull(std::vector<Point>{{0, 0}, {1, 1}}), GeometryError);
    CHECK_THROWS_AS(convex_hull(std::vector<Point>{{0, 0}, {1, 1}, {2, 2}, {3, 3}}), GeometryError);
}

TEST_CASE("convex hull equals the brute-force hull on random point sets")
{
    Rng rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        const auto pts = testing::random_points(rng, trial == 0 ? 200 : 3 + rng.below(120), 0.0, 100.0);
        const auto fast = convex_hull(pts);
        CHECK(same_vertex_set(fast, ref::hull_vertices(pts)));
        // Every input point lies inside or on the hull.
        for (const Point& p : pts) {
            for (std::size_t i = 0; i < fast.size(); ++i) {
                const Point& a = fast[i];
                const Point& b = fast[(i + 1) % fast.size()];
                CHECK((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= -1e-9);
            }
        }
    }
}

TEST_CASE("cell cover matches the separating-axis brute force")
{
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const auto pts = testing::random_points(rng, 3, 0.0, 63.0);
        std::vector<Point> poly;
        try {
            poly = convex_hull(pts);
        } catch (const GeometryError&) {
            continue;
        }
        CHECK(hull_cover(poly, 64, 64) == ref::rasterize_polygon(poly, 64, 64));
    }
    // Integer vertices make cells touch the polygon at single points.
    const std::vector<Point> diamond{{10, 2}, {18, 10}, {10, 18}, {2, 10}};
    CHECK(hull_cover(convex_hull(diamond), 24, 24) == ref::rasterize_polygon(convex_hull(diamond), 24, 24));

    const std::vector<Point> frame{{0, 0}, {31, 0}, {31, 15}, {0, 15}};
    const BinaryMask full = rasterize_hull(convex_hull(frame), 16, 32);
    CHECK(count_nonzero(full) == 16u * 32u);
}

TEST_CASE("segment closure matches the all-pairs brute force")
{
    Rng rng(40);
    for (int trial = 0; trial < 30; ++trial) {
        const auto pts = testing::random_points(rng, 3 + rng.below(6), 0.0, 27.0);
        std::vector<Point> poly;
        try {
            poly = convex_hull(pts);
        } catch (const GeometryError&) {
            continue;
        }
        const BinaryMask cover = hull_cover(poly, 28, 28);
        const BinaryMask closed = rasterize_hull(poly, 28, 28);
        CHECK(closed == ref::segment_closure(cover));
        for (std::size_t i = 0; i < cover.size(); ++i) CHECK(closed.values()[i] >= cover.values()[i]);
    }
    BinaryMask two(8, 8, 0);
    two.at(1, 1) = 1;
    two.at(5, 7) = 1;
    const BinaryMask line = segment_closure(two);
    std::size_t n = 0;
    for_each_line_pixel(1, 1, 7, 5, [&](int x, int y) {
        CHECK(line.at(y, x) == 1);
        ++n;
    });
    CHECK(count_nonzero(line) >= n);
}

namespace {

std::vector<std::pair<int, int>> bresenham(int x0, int y0, int x1, int y1)
{
    std::vector<std::pair<int, int>> out;
    for_each_line_pixel(x0, y0, x1, y1, [&](int x, int y) { out.emplace_back(x, y); });
    return out;
}

void check_digitally_convex(const BinaryMask& mask, Rng& rng, std::size_t pairs)
{
    std::vector<std::pair<int, int>> ones;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.at(y, x)) ones.emplace_back(x, y);
    REQUIRE(!ones.empty());
    const bool exhaustive = pairs == 0;
    const std::size_t outer = exhaustive ? ones.size() : pairs;
    for (std::size_t i = 0; i < outer; ++i) {
        const auto a = exhaustive ? ones[i] : ones[rng.below(ones.size())];
        const std::size_t inner = exhaustive ? ones.size() : 1;
        for (std::size_t j = 0; j < inner; ++j) {
            const auto b = exhaustive ? ones[j] : ones[rng.below(ones.size())];
            for (const auto& [x, y] : bresenham(a.first, a.second, b.first, b.second)) REQUIRE(mask.at(y, x) == 1);
        }
    }
}

}  // namespace

TEST_CASE("property: face hull masks are digitally convex and contain every landmark")
{
    Rng rng(77);
    for (std::uint64_t face = 0; face < 12; ++face) {
        const auto sf = synth::render_face(128, 3, face);
        const BinaryMask mask = rasterize_hull(convex_hull(sf.contour), 128, 128);
        for (const Point& p : sf.contour) {
            CHECK(mask.at(static_cast<int>(std::lround(p.y)), static_cast<int>(std::lround(p.x))) == 1);
        }
        check_digitally_convex(mask, rng, 3000);
    }
    // Every pair, on small crops.
    for (std::uint64_t face = 0; face < 6; ++face) {
        const auto sf = synth::render_face(40, 11, face);
        check_digitally_convex(rasterize_hull(convex_hull(sf.contour), 40, 40), rng, 0);
    }
}

TEST_CASE("fallback ellipse")
{
    const BinaryMask m = fallback_ellipse_mask(256, 256);
    const double frac = static_cast<double>(count_nonzero(m)) / (256.0 * 256.0);
    CHECK(frac >= 0.30);
    CHECK(frac <= 0.45);
    CHECK(frac == doctest::Approx(3.14159265358979 * 0.30 * 0.40).epsilon(0.02));

    CHECK(count_nonzero(fallback_ellipse_mask(16, 16)) > 0);

    const BinaryMask wide = fallback_ellipse_mask(128, 256);
    int rows = 0, cols = 0;
    for (int y = 0; y < 128; ++y) {
        bool any = false;
        for (int x = 0; x < 256; ++x) any = any || wide.at(y, x);
        rows += any;
    }
    for (int x = 0; x < 256; ++x) {
        bool any = false;
        for (int y = 0; y < 128; ++y) any = any || wide.at(y, x);
        cols += any;
    }
    CHECK(std::abs(cols - 153) <= 2);
    CHECK(std::abs(rows - 102) <= 2);
}

TEST_CASE("face records from files")
{
    const auto dir = testing::scratch_dir("landmarks");
    const auto sf = synth::render_face(96, 5, 0);
    io::write_png(dir / "face.png", sf.image);
    write_landmarks(dir / "face.json", sf.contour);

    SUBCASE("landmark JSON round trip")
    {
        const auto back = read_landmarks(dir / "face.json");
        REQUIRE(back.size() == sf.contour.size());
        for (std::size_t i = 0; i < back.size(); ++i) {
            CHECK(back[i].x == doctest::Approx(sf.contour[i].x));
            CHECK(back[i].y == doctest::Approx(sf.contour[i].y));
        }
    }
    SUBCASE("hull covers a plausible share of the frame")
    {
        const FaceRecord r = load_face_record(dir / "face.png", dir / "face.json");
        const double frac = static_cast<double>(count_nonzero(r.hull_mask)) / (96.0 * 96.0);
        CHECK(frac > 0.05);
        CHECK(frac < 1.0);
        CHECK_FALSE(r.fallback_mask);
        CHECK(r.source_id == "face");
        CHECK(r.hull_mask == rasterize_hull(convex_hull(r.landmarks), 96, 96));
    }
    SUBCASE("missing landmarks fall back to the ellipse")
    {
        const FaceRecord r = load_face_record(dir / "face.png", std::nullopt);
        CHECK(r.fallback_mask);
        CHECK(r.hull_mask == fallback_ellipse_mask(96, 96));
    }
    SUBCASE("out-of-bounds landmark names its index")
    {
        auto pts = sf.contour;
        pts[4] = {200.0, 10.0};
        write_landmarks(dir / "bad.json", pts);
        try {
            load_face_record(dir / "face.png", dir / "bad.json");
            FAIL("expected an error");
        } catch (const DomainError& e) {
            CHECK(std::string(e.what()).find("landmark 4") != std::string::npos);
        }
    }
    SUBCASE("resizing scales the landmarks")
    {
        const FaceRecord r = load_face_record(dir / "face.png", dir / "face.json", 48);
        CHECK(r.image.height() == 48);
        CHECK(r.landmarks[0].x == doctest::Approx((sf.contour[0].x + 0.5) * 0.5 - 0.5).epsilon(1e-9));
    }
    SUBCASE("undecodable image")
    {
        std::ofstream(dir / "junk.png") << "not a png";
        CHECK_THROWS_AS(load_face_record(dir / "junk.png", std::nullopt), IoError);
    }
}

TEST_CASE("manifest loading is order-stable and split-disjoint")
{
    const auto dir = testing::scratch_dir("manifest");
    synth::CorpusSpec spec;
    spec.size = 64;
    spec.train_reals = 6;
    spec.test_reals = 4;
    const auto path = synth::write_corpus(dir, spec);
    const DatasetManifest m = DatasetManifest::load(path);
    CHECK(m.count(Split::train, Label::real) == 6);
    CHECK(m.count(Split::test, Label::real) == 4);
    const auto train = m.select(Split::train, Label::real);
    const auto test = m.select(Split::test, Label::real);
    for (const auto& a : train)
        for (const auto& b : test) CHECK(a.image != b.image);
    const DatasetManifest again = DatasetManifest::load(path);
    for (std::size_t i = 0; i < m.entries().size(); ++i) CHECK(m.entries()[i].image == again.entries()[i].image);

    m.save(dir / "copy.json");
    const DatasetManifest copy = DatasetManifest::load(dir / "copy.json");
    CHECK(copy.entries().size() == m.entries().size());

    std::ofstream(dir / "bad.json") << R"({"entries": [{"image": "nope.png", "split": "train", "label": "real"}]})";
    CHECK_THROWS_AS(DatasetManifest::load(dir / "bad.json"), PreconditionError);
    std::ofstream(dir / "bad2.json") << R"({"entries": [{"image": "images/train_0.png", "split": "dev", "label": "real"}]})";
    CHECK_THROWS_AS(DatasetManifest::load(dir / "bad2.json"), ConfigError);
}
