#include "wheatai/geom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <fmt/format.h>

#include "wheatai/error.hpp"

namespace wheatai::geom {

namespace {

double signed_area(std::span<const Point2> ring) {
    const std::size_t n = ring.size();
    if (n < 3) {
        return 0.0;
    }
    double twice = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        twice += cross(ring[i], ring[(i + 1) % n]);
    }
    return 0.5 * twice;
}

bool near(Point2 a, Point2 b, double eps) {
    return std::abs(a.x - b.x) <= eps && std::abs(a.y - b.y) <= eps;
}

}  // namespace

ConvexPolygon::ConvexPolygon(std::vector<Point2> vertices) {
    std::vector<Point2> cleaned;
    cleaned.reserve(vertices.size());
    for (const Point2& p : vertices) {
        if (cleaned.empty() || !near(cleaned.back(), p, kVertexEpsilon)) {
            cleaned.push_back(p);
        }
    }
    while (cleaned.size() > 1 && near(cleaned.front(), cleaned.back(), kVertexEpsilon)) {
        cleaned.pop_back();
    }
    if (cleaned.size() < 3) {
        return;
    }
    const double area = signed_area(cleaned);
    if (!(std::abs(area) > 0.0)) {
        return;
    }
    if (area < 0.0) {
        std::reverse(cleaned.begin(), cleaned.end());
    }
    vertices_ = std::move(cleaned);
}

double canonical_angle(double theta) {
    constexpr double pi = std::numbers::pi;
    double t = std::fmod(theta + pi / 2.0, pi);
    if (t < 0.0) {
        t += pi;
    }
    t -= pi / 2.0;
    if (t >= pi / 2.0) {
        t = -pi / 2.0;
    }
    return t;
}

OrientedBox::OrientedBox(double cx, double cy, double w, double h, double theta)
    : cx_(cx), cy_(cy), w_(w), h_(h), theta_(0.0) {
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) || !std::isfinite(h) ||
        !std::isfinite(theta)) {
        throw Error(ErrorCode::invalid_box, "oriented box has a non-finite field");
    }
    if (!(w > 0.0) || !(h > 0.0)) {
        throw Error(ErrorCode::invalid_box,
                    fmt::format("oriented box needs positive size, got {} x {}", w, h));
    }
    theta_ = canonical_angle(theta);
}

OrientedBox OrientedBox::translated(double dx, double dy) const {
    return {cx_ + dx, cy_ + dy, w_, h_, theta_};
}

OrientedBox OrientedBox::rotated_about(Point2 pivot, double angle) const {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const Point2 d = center() - pivot;
    return {pivot.x + c * d.x - s * d.y, pivot.y + s * d.x + c * d.y, w_, h_, theta_ + angle};
}

ConvexPolygon obb_corners(const OrientedBox& box) {
    const double c = std::cos(box.theta());
    const double s = std::sin(box.theta());
    const double hw = box.w() / 2.0;
    const double hh = box.h() / 2.0;
    // Local corners listed counter-clockwise in (x, y).
    const std::array<Point2, 4> local{{{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}}};
    std::vector<Point2> out;
    out.reserve(4);
    for (const Point2& p : local) {
        out.push_back({box.cx() + c * p.x - s * p.y, box.cy() + s * p.x + c * p.y});
    }
    return ConvexPolygon(std::move(out));
}

double polygon_area(std::span<const Point2> ring) {
    return std::abs(signed_area(ring));
}

double polygon_area(const ConvexPolygon& p) {
    return polygon_area(std::span<const Point2>(p.vertices()));
}

std::vector<Point2> clip_ring(std::span<const Point2> ring, const ConvexPolygon& clip) {
    std::vector<Point2> output(ring.begin(), ring.end());
    const auto& edges = clip.vertices();
    if (edges.empty()) {
        return {};
    }
    for (std::size_t i = 0; i < edges.size() && !output.empty(); ++i) {
        const Point2 p = edges[i];
        const Point2 edge = edges[(i + 1) % edges.size()] - p;
        const std::vector<Point2> input = std::move(output);
        output.clear();
        for (std::size_t k = 0; k < input.size(); ++k) {
            const Point2 s = input[k];
            const Point2 e = input[(k + 1) % input.size()];
            const double ds = cross(edge, s - p);
            const double de = cross(edge, e - p);
            if (ds >= 0.0) {
                output.push_back(s);
            }
            if ((ds >= 0.0) != (de >= 0.0)) {
                const double t = ds / (ds - de);
                output.push_back(s + (e - s) * t);
            }
        }
    }
    return output;
}

ConvexPolygon convex_intersection(const ConvexPolygon& a, const ConvexPolygon& b) {
    if (a.empty() || b.empty()) {
        return {};
    }
    return ConvexPolygon(clip_ring(a.vertices(), b));
}

bool same_point_set(const OrientedBox& a, const OrientedBox& b, double tol) {
    const double scale = 1.0 + std::max({a.w(), a.h(), b.w(), b.h()});
    const double eps = tol * scale;
    const auto ca = obb_corners(a).vertices();
    const auto cb = obb_corners(b).vertices();
    if (ca.size() != cb.size()) {
        return false;
    }
    for (const Point2& p : ca) {
        const bool found = std::any_of(cb.begin(), cb.end(),
                                       [&](const Point2& q) { return near(p, q, eps); });
        if (!found) {
            return false;
        }
    }
    return true;
}

double rotated_iou(const OrientedBox& a, const OrientedBox& b) {
    if (same_point_set(a, b, 1e-12)) {
        return 1.0;
    }
    const double inter = polygon_area(convex_intersection(obb_corners(a), obb_corners(b)));
    const double uni = a.area() + b.area() - inter;
    if (!(uni > 0.0)) {
        return 0.0;
    }
    return std::clamp(inter / uni, 0.0, 1.0);
}

bool contains(const OrientedBox& box, Point2 p, double tol) {
    const double c = std::cos(box.theta());
    const double s = std::sin(box.theta());
    const Point2 d = p - box.center();
    const double u = c * d.x + s * d.y;
    const double v = -s * d.x + c * d.y;
    return std::abs(u) <= box.w() / 2.0 + tol && std::abs(v) <= box.h() / 2.0 + tol;
}

std::vector<Point2> convex_hull(std::span<const Point2> points) {
    std::vector<Point2> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) {
        return pts;
    }
    std::vector<Point2> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Point2& p : pts) {
        while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) {
            --k;
        }
        hull[k++] = p;
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = pts.size() - 1; i-- > 0;) {
        const Point2 p = pts[i];
        while (k >= lower && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) {
            --k;
        }
        hull[k++] = p;
    }
    hull.resize(k - 1);
    return hull;
}

PixelRect padded_crop(const OrientedBox& box, double padding, int width, int height) {
    const ConvexPolygon poly = obb_corners(box);
    double minx = poly.vertices()[0].x, maxx = minx;
    double miny = poly.vertices()[0].y, maxy = miny;
    for (const Point2& p : poly.vertices()) {
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    const double px = padding * (maxx - minx);
    const double py = padding * (maxy - miny);
    PixelRect r{static_cast<int>(std::floor(minx - px)), static_cast<int>(std::floor(miny - py)),
                static_cast<int>(std::ceil(maxx + px)), static_cast<int>(std::ceil(maxy + py))};
    r.x0 = std::clamp(r.x0, 0, width);
    r.x1 = std::clamp(r.x1, r.x0, width);
    r.y0 = std::clamp(r.y0, 0, height);
    r.y1 = std::clamp(r.y1, r.y0, height);
    return r;
}

OrientedBox min_area_rect(std::span<const Point2> points) {
    if (points.size() < 3) {
        throw Error(ErrorCode::degenerate_input,
                    fmt::format("min_area_rect needs at least 3 points, got {}", points.size()));
    }
    const std::vector<Point2> hull = convex_hull(points);
    const std::size_t m = hull.size();
    if (m < 3 || !(polygon_area(hull) > 0.0)) {
        throw Error(ErrorCode::degenerate_input, "min_area_rect input points are collinear");
    }

    const auto next = [m](std::size_t i) { return (i + 1) % m; };
    const auto edge_dir = [&](std::size_t i) {
        const Point2 d = hull[next(i)] - hull[i];
        const double len = std::hypot(d.x, d.y);
        return Point2{d.x / len, d.y / len};
    };

    // Caliper indices: farthest along the edge, farthest from the edge, and
    // farthest against the edge direction.
    Point2 e = edge_dir(0);
    Point2 n{-e.y, e.x};
    std::size_t i_umax = 0, i_vmax = 0, i_umin = 0;
    for (std::size_t j = 1; j < m; ++j) {
        if (dot(hull[j], e) > dot(hull[i_umax], e)) i_umax = j;
        if (dot(hull[j], n) > dot(hull[i_vmax], n)) i_vmax = j;
        if (dot(hull[j], e) < dot(hull[i_umin], e)) i_umin = j;
    }

    double best_area = std::numeric_limits<double>::infinity();
    Point2 best_center{}, best_e{}, best_n{};
    double best_le = 0.0, best_ln = 0.0;

    for (std::size_t i = 0; i < m; ++i) {
        e = edge_dir(i);
        n = {-e.y, e.x};
        for (std::size_t step = 0; step < m && dot(hull[next(i_umax)], e) > dot(hull[i_umax], e); ++step)
            i_umax = next(i_umax);
        for (std::size_t step = 0; step < m && dot(hull[next(i_vmax)], n) > dot(hull[i_vmax], n); ++step)
            i_vmax = next(i_vmax);
        for (std::size_t step = 0; step < m && dot(hull[next(i_umin)], e) < dot(hull[i_umin], e); ++step)
            i_umin = next(i_umin);

        const double umax = dot(hull[i_umax], e);
        const double umin = dot(hull[i_umin], e);
        const double vmin = dot(hull[i], n);
        const double vmax = dot(hull[i_vmax], n);
        const double area = (umax - umin) * (vmax - vmin);
        if (area < best_area) {
            best_area = area;
            best_center = e * ((umax + umin) / 2.0) + n * ((vmax + vmin) / 2.0);
            best_e = e;
            best_n = n;
            best_le = umax - umin;
            best_ln = vmax - vmin;
        }
    }

    if (best_le >= best_ln) {
        return {best_center.x, best_center.y, best_le, best_ln, std::atan2(best_e.y, best_e.x)};
    }
    return {best_center.x, best_center.y, best_ln, best_le, std::atan2(best_n.y, best_n.x)};
}

}  // namespace wheatai::geom
