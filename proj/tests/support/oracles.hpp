#pragma once

// Independent reference computations used by the unit and acceptance suites.
// Nothing in here calls into the library's geometry code.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace wheatai::testing {

struct RawBox {
    double cx, cy, w, h, theta;
};

inline bool raw_inside(const RawBox& b, double x, double y) {
    const double dx = x - b.cx;
    const double dy = y - b.cy;
    const double u = std::cos(b.theta) * dx + std::sin(b.theta) * dy;
    const double v = -std::sin(b.theta) * dx + std::cos(b.theta) * dy;
    return std::abs(u) <= b.w / 2 && std::abs(v) <= b.h / 2;
}

inline void raw_bounds(const RawBox& b, double& x0, double& y0, double& x1, double& y1) {
    const double ex = std::abs(std::cos(b.theta)) * b.w / 2 + std::abs(std::sin(b.theta)) * b.h / 2;
    const double ey = std::abs(std::sin(b.theta)) * b.w / 2 + std::abs(std::cos(b.theta)) * b.h / 2;
    x0 = std::min(x0, b.cx - ex);
    x1 = std::max(x1, b.cx + ex);
    y0 = std::min(y0, b.cy - ey);
    y1 = std::max(y1, b.cy + ey);
}

/// IoU estimated on an n x n grid of cell centers spanning both boxes.
inline double raster_iou(const RawBox& a, const RawBox& b, int n = 512) {
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
    double x1 = -x0, y1 = -x0;
    raw_bounds(a, x0, y0, x1, y1);
    raw_bounds(b, x0, y0, x1, y1);
    const double sx = (x1 - x0) / n;
    const double sy = (y1 - y0) / n;
    long inter = 0, uni = 0;
    for (int j = 0; j < n; ++j) {
        const double y = y0 + (j + 0.5) * sy;
        for (int i = 0; i < n; ++i) {
            const double x = x0 + (i + 0.5) * sx;
            const bool ia = raw_inside(a, x, y);
            const bool ib = raw_inside(b, x, y);
            inter += (ia && ib);
            uni += (ia || ib);
        }
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct XY {
    double x, y;
};

/// Minimum enclosing-rectangle area, trying the direction of every hull edge.
/// Hull edges are found by brute force: (i, j) is a hull edge when every
/// other point lies on one side of the line through them.
inline double brute_force_min_rect_area(const std::vector<XY>& pts) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double ex = pts[j].x - pts[i].x;
            const double ey = pts[j].y - pts[i].y;
            const double len = std::hypot(ex, ey);
            if (len == 0.0) continue;
            bool all_left = true;
            for (std::size_t k = 0; k < n && all_left; ++k) {
                const double c = ex * (pts[k].y - pts[i].y) - ey * (pts[k].x - pts[i].x);
                if (c < -1e-12 * len) all_left = false;
            }
            if (!all_left) continue;
            const double ux = ex / len, uy = ey / len;
            double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
            for (const XY& p : pts) {
                const double u = p.x * ux + p.y * uy;
                const double v = -p.x * uy + p.y * ux;
                umin = std::min(umin, u);
                umax = std::max(umax, u);
                vmin = std::min(vmin, v);
                vmax = std::max(vmax, v);
            }
            best = std::min(best, (umax - umin) * (vmax - vmin));
        }
    }
    return best;
}

}  // namespace wheatai::testing
