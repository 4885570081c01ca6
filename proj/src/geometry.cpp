#include "camo/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace camo {

namespace {

constexpr double kEdgeEps = 1e-9;

double cross(const Point& o, const Point& a, const Point& b) noexcept
{
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

std::vector<Point> convex_hull(std::span<const Point> points)
{
    if (points.size() < 3) {
        throw GeometryError("convex_hull: need at least 3 points, got " + std::to_string(points.size()));
    }
    std::vector<Point> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    // Andrew's monotone chain; strict turns drop collinear vertices.
    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Point& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) {
            --k;
        }
        hull[k++] = p;
    }
    const std::size_t lower = k + 1;
    for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0.0) {
            --k;
        }
        hull[k++] = *it;
    }
    hull.resize(k > 0 ? k - 1 : 0);
    if (hull.size() < 3) {
        throw GeometryError("convex_hull: points are collinear");
    }
    return hull;
}

double signed_area2(std::span<const Point> polygon) noexcept
{
    double a = 0.0;
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        const Point& p = polygon[i];
        const Point& q = polygon[(i + 1) % polygon.size()];
        a += p.x * q.y - q.x * p.y;
    }
    return a;
}

BinaryMask hull_cover(std::span<const Point> hull, int height, int width)
{
    BinaryMask mask(height, width, 0);
    if (hull.size() < 3) {
        return mask;
    }
    // A pixel cell [x - 1/2, x + 1/2]^2 meets the hull exactly when its center
    // lies in the hull grown by that square, which is again convex.
    std::vector<Point> corners;
    corners.reserve(4 * hull.size());
    for (const Point& v : hull) {
        for (const double dy : {-0.5, 0.5}) {
            for (const double dx : {-0.5, 0.5}) {
                corners.push_back({v.x + dx, v.y + dy});
            }
        }
    }
    const std::vector<Point> polygon = convex_hull(corners);
    const double orient = signed_area2(polygon) >= 0.0 ? 1.0 : -1.0;
    const std::size_t n = polygon.size();

    // Per row, intersect the half-planes of every edge to get one x interval.
    for (int y = 0; y < height; ++y) {
        double lo = -1e300;
        double hi = 1e300;
        bool empty = false;
        for (std::size_t i = 0; i < n && !empty; ++i) {
            const Point& a = polygon[i];
            const Point& b = polygon[(i + 1) % n];
            // inside: orient * cross(a, b, (x, y)) >= 0, linear in x: s*x + t >= 0
            const double s = -orient * (b.y - a.y);
            const double t = orient * ((b.x - a.x) * (y - a.y) + (b.y - a.y) * a.x);
            if (std::abs(s) < 1e-15) {
                if (t < -kEdgeEps) {
                    empty = true;
                }
            } else if (s > 0.0) {
                lo = std::max(lo, (-t - kEdgeEps) / s);
            } else {
                hi = std::min(hi, (-t - kEdgeEps) / s);
            }
        }
        if (empty || lo > hi) {
            continue;
        }
        const int x0 = std::max(0, static_cast<int>(std::ceil(lo)));
        const int x1 = std::min(width - 1, static_cast<int>(std::floor(hi)));
        for (int x = x0; x <= x1; ++x) {
            mask.at(y, x) = 1;
        }
    }
    return mask;
}

BinaryMask segment_closure(BinaryMask mask)
{
    const int h = mask.height();
    const int w = mask.width();
    auto on_border = [&](int x, int y) {
        return x == 0 || y == 0 || x == w - 1 || y == h - 1 || !mask.at(y, x - 1) || !mask.at(y, x + 1) ||
               !mask.at(y - 1, x) || !mask.at(y + 1, x);
    };
    // A segment can only leave the set through its outline, so only pairs of
    // border pixels are drawn. After the first round only pairs with a newly
    // added pixel can produce anything new.
    BinaryMask fresh(h, w, 1);
    while (true) {
        std::vector<std::pair<int, int>> border;
        std::vector<std::pair<int, int>> border_fresh;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (mask.at(y, x) && on_border(x, y)) {
                    border.emplace_back(x, y);
                    if (fresh.at(y, x)) {
                        border_fresh.emplace_back(x, y);
                    }
                }
            }
        }
        std::fill(fresh.values().begin(), fresh.values().end(), std::uint8_t{0});
        bool grown = false;
        auto draw = [&](int xa, int ya, int xb, int yb) {
            for_each_line_pixel(xa, ya, xb, yb, [&](int x, int y) {
                if (!mask.at(y, x)) {
                    mask.at(y, x) = 1;
                    fresh.at(y, x) = 1;
                    grown = true;
                }
            });
        };
        for (const auto& [xa, ya] : border_fresh) {
            for (const auto& [xb, yb] : border) {
                draw(xa, ya, xb, yb);
                draw(xb, yb, xa, ya);
            }
        }
        if (!grown) {
            return mask;
        }
    }
}

BinaryMask rasterize_hull(std::span<const Point> hull, int height, int width)
{
    return segment_closure(hull_cover(hull, height, width));
}

BinaryMask fallback_ellipse_mask(int height, int width)
{
    if (height < 16 || width < 16) {
        throw ParameterError("fallback ellipse needs an image of at least 16x16");
    }
    BinaryMask mask(height, width, 0);
    const double cx = (width - 1) / 2.0;
    const double cy = (height - 1) / 2.0;
    const double a = 0.30 * width;
    const double b = 0.40 * height;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double u = (x - cx) / a;
            const double v = (y - cy) / b;
            mask.at(y, x) = (u * u + v * v <= 1.0) ? 1 : 0;
        }
    }
    return mask;
}

std::size_t count_nonzero(const BinaryMask& mask) noexcept
{
    return static_cast<std::size_t>(
        std::count_if(mask.values().begin(), mask.values().end(), [](auto v) { return v != 0; }));
}

}  // namespace camo
