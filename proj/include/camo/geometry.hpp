#pragma once

#include <span>
#include <vector>

#include "camo/image.hpp"

namespace camo {

/// Pixel coordinates, origin top-left; pixel (x, y) has its center at (x, y).
struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Counter-clockwise (in image coordinates, y down: clockwise on screen)
/// vertex list with collinear points dropped. Throws GeometryError for fewer
/// than three points or an all-collinear set.
std::vector<Point> convex_hull(std::span<const Point> points);

/// Signed twice-area; positive for the vertex order convex_hull returns.
double signed_area2(std::span<const Point> polygon) noexcept;

/// Conservative rasterization: 1 where the pixel's unit cell touches the
/// convex polygon (boundary included), so the pixel holding any point of the
/// polygon, every landmark in particular, is set.
BinaryMask hull_cover(std::span<const Point> hull, int height, int width);

/// Calls `visit(x, y)` for every pixel of the Bresenham line from (x0, y0) to
/// (x1, y1), endpoints included.
template <typename Visit>
void for_each_line_pixel(int x0, int y0, int x1, int y1, Visit&& visit)
{
    const int dx = x1 > x0 ? x1 - x0 : x0 - x1;
    const int sx = x0 < x1 ? 1 : -1;
    const int dy = -(y1 > y0 ? y1 - y0 : y0 - y1);
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        visit(x0, y0);
        if (x0 == x1 && y0 == y1) {
            return;
        }
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

/// Smallest superset of `mask` that holds the Bresenham line between any two
/// of its pixels.
BinaryMask segment_closure(BinaryMask mask);

/// The hull mask: hull_cover closed under Bresenham segments, so it is
/// digitally convex and contains every landmark.
BinaryMask rasterize_hull(std::span<const Point> hull, int height, int width);

/// Centered axis-aligned ellipse with semi-axes (0.30 W, 0.40 H).
BinaryMask fallback_ellipse_mask(int height, int width);

std::size_t count_nonzero(const BinaryMask& mask) noexcept;

}  // namespace camo
