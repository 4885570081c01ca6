#include "camo_ref/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "camo/random.hpp"

namespace camo::ref {

int mirror(int i, int n)
{
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

Plane gaussian_kernel_2d(int k, double sigma)
{
    Plane kern(k, k);
    const int r = k / 2;
    double sum = 0.0;
    for (int y = -r; y <= r; ++y) {
        for (int x = -r; x <= r; ++x) {
            const double v = k == 1 ? 1.0 : std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
            kern.at(y + r, x + r) = v;
            sum += v;
        }
    }
    for (double& v : kern.values()) v /= sum;
    return kern;
}

ImageF convolve_2d(const ImageF& img, const Plane& kernel)
{
    const int h = img.height();
    const int w = img.width();
    const int r = kernel.height() / 2;
    ImageF out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int dy = -r; dy <= r; ++dy) {
                    for (int dx = -r; dx <= r; ++dx) {
                        acc += kernel.at(dy + r, dx + r) * img.at(mirror(y + dy, h), mirror(x + dx, w), c);
                    }
                }
                out.at(y, x, c) = acc;
            }
        }
    }
    return out;
}

ImageF add_noise(const ImageF& img, double mu, double sigma, std::uint64_t seed)
{
    ImageF out(img.height(), img.width());
    auto src = img.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double v = src[i] + mu + sigma * normal_at(seed, 0, i);
        dst[i] = std::min(1.0, std::max(0.0, v));
    }
    return out;
}

ImageF blend(const ImageF& processed, const ImageF& original, const Plane& mask)
{
    ImageF out(processed.height(), processed.width());
    for (int y = 0; y < processed.height(); ++y) {
        for (int x = 0; x < processed.width(); ++x) {
            const double m = mask.at(y, x);
            for (int c = 0; c < 3; ++c) {
                out.at(y, x, c) = m * processed.at(y, x, c) + (1.0 - m) * original.at(y, x, c);
            }
        }
    }
    return out;
}

namespace {

double side(const Point& a, const Point& b, const Point& p)
{
    return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
}

}  // namespace

std::vector<Point> hull_vertices(std::span<const Point> points)
{
    std::vector<Point> out;
    auto add = [&out](const Point& p) {
        if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    };
    const std::size_t n = points.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || points[i] == points[j]) continue;
            bool edge = true;
            for (std::size_t k = 0; k < n && edge; ++k) {
                const double s = side(points[i], points[j], points[k]);
                if (s < 0.0) edge = false;
                // A collinear point beyond the segment means (i, j) is not a full edge.
                if (s == 0.0) {
                    const double t = (points[k].x - points[i].x) * (points[j].x - points[i].x) +
                                     (points[k].y - points[i].y) * (points[j].y - points[i].y);
                    const double len2 = (points[j].x - points[i].x) * (points[j].x - points[i].x) +
                                        (points[j].y - points[i].y) * (points[j].y - points[i].y);
                    if (t < 0.0 || t > len2) edge = false;
                }
            }
            if (edge) {
                add(points[i]);
                add(points[j]);
            }
        }
    }
    return out;
}

BinaryMask rasterize_polygon(std::span<const Point> polygon, int height, int width)
{
    // Separating-axis test between each pixel cell and the polygon: the
    // candidate axes are x, y and every edge normal.
    std::vector<Point> axes{{1.0, 0.0}, {0.0, 1.0}};
    const std::size_t n = polygon.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = polygon[i];
        const Point& b = polygon[(i + 1) % n];
        axes.push_back({-(b.y - a.y), b.x - a.x});
    }
    BinaryMask mask(height, width, 0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            bool separated = false;
            for (const Point& ax : axes) {
                double plo = 1e300, phi = -1e300;
                for (const Point& p : polygon) {
                    const double d = ax.x * p.x + ax.y * p.y;
                    plo = std::min(plo, d);
                    phi = std::max(phi, d);
                }
                const double center = ax.x * x + ax.y * y;
                const double reach = 0.5 * (std::abs(ax.x) + std::abs(ax.y));
                const double tol = 1e-9 * std::hypot(ax.x, ax.y);
                if (phi < center - reach - tol || plo > center + reach + tol) {
                    separated = true;
                    break;
                }
            }
            mask.at(y, x) = separated ? 0 : 1;
        }
    }
    return mask;
}

BinaryMask segment_closure(BinaryMask mask)
{
    const int h = mask.height();
    const int w = mask.width();
    bool grown = true;
    while (grown) {
        grown = false;
        std::vector<std::pair<int, int>> on;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (mask.at(y, x)) on.emplace_back(x, y);
        for (const auto& [xa, ya] : on) {
            for (const auto& [xb, yb] : on) {
                // Textbook integer Bresenham, all octants.
                int x = xa, y = ya;
                const int dx = std::abs(xb - xa), sx = xa < xb ? 1 : -1;
                const int dy = -std::abs(yb - ya), sy = ya < yb ? 1 : -1;
                int err = dx + dy;
                while (true) {
                    if (!mask.at(y, x)) {
                        mask.at(y, x) = 1;
                        grown = true;
                    }
                    if (x == xb && y == yb) break;
                    const int e2 = 2 * err;
                    if (e2 >= dy) { err += dy; x += sx; }
                    if (e2 <= dx) { err += dx; y += sy; }
                }
            }
        }
    }
    return mask;
}

double ssim(const ImageF& a, const ImageF& b)
{
    const Plane la = luma_255(a);
    const Plane lb = luma_255(b);
    const Plane win = gaussian_kernel_2d(11, 1.5);
    const double c1 = std::pow(0.01 * 255.0, 2);
    const double c2 = std::pow(0.03 * 255.0, 2);
    double total = 0.0;
    int count = 0;
    for (int y = 0; y + 11 <= a.height(); ++y) {
        for (int x = 0; x + 11 <= a.width(); ++x) {
            double ma = 0, mb = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    ma += win.at(i, j) * la.at(y + i, x + j);
                    mb += win.at(i, j) * lb.at(y + i, x + j);
                }
            double va = 0, vb = 0, cov = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double da = la.at(y + i, x + j) - ma;
                    const double db = lb.at(y + i, x + j) - mb;
                    va += win.at(i, j) * da * da;
                    vb += win.at(i, j) * db * db;
                    cov += win.at(i, j) * da * db;
                }
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return total / count;
}

double psnr(const ImageF& a, const ImageF& b)
{
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = 255.0 * (a.values()[i] - b.values()[i]);
        se += d * d;
    }
    if (se == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 * static_cast<double>(a.size()) / se);
}

}  // namespace camo::ref
