#pragma once

#include <array>
#include <span>
#include <vector>

namespace wheatai::geom {

/// Pixel-space point. Image convention: x to the right, y downward.
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2 operator*(Point2 a, double s) { return {a.x * s, a.y * s}; }
    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }

// Vertices closer than this are merged when building polygons.
inline constexpr double kVertexEpsilon = 1e-9;

/// Convex polygon with counter-clockwise vertices (positive shoelace area in
/// (x, y) coordinates). Either empty or at least three distinct vertices.
class ConvexPolygon {
public:
    ConvexPolygon() = default;

    /// Accepts vertices in either winding; drops consecutive duplicates and
    /// reverses clockwise input. Fewer than three distinct vertices, or zero
    /// area, yields the empty polygon. Convexity is the caller's promise.
    explicit ConvexPolygon(std::vector<Point2> vertices);

    const std::vector<Point2>& vertices() const noexcept { return vertices_; }
    std::size_t size() const noexcept { return vertices_.size(); }
    bool empty() const noexcept { return vertices_.empty(); }

private:
    std::vector<Point2> vertices_;
};

/// Rotated rectangle. theta is in radians and kept in [-pi/2, pi/2); the box
/// is the axis-aligned w x h rectangle rotated by theta about (cx, cy) using
/// [cos -sin; sin cos] in pixel coordinates.
class OrientedBox {
public:
    /// Throws Error(invalid_box) for non-finite fields or non-positive w/h.
    OrientedBox(double cx, double cy, double w, double h, double theta);

    double cx() const noexcept { return cx_; }
    double cy() const noexcept { return cy_; }
    double w() const noexcept { return w_; }
    double h() const noexcept { return h_; }
    double theta() const noexcept { return theta_; }
    double area() const noexcept { return w_ * h_; }
    Point2 center() const noexcept { return {cx_, cy_}; }

    OrientedBox translated(double dx, double dy) const;
    /// Rigid rotation of the whole box about `pivot`.
    OrientedBox rotated_about(Point2 pivot, double angle) const;

    friend bool operator==(const OrientedBox&, const OrientedBox&) = default;

private:
    double cx_, cy_, w_, h_, theta_;
};

/// Folds any angle into [-pi/2, pi/2).
double canonical_angle(double theta);

ConvexPolygon obb_corners(const OrientedBox& box);

/// Absolute shoelace area. Also valid for simple non-convex rings.
double polygon_area(std::span<const Point2> ring);
double polygon_area(const ConvexPolygon& p);

ConvexPolygon convex_intersection(const ConvexPolygon& a, const ConvexPolygon& b);

/// Sutherland-Hodgman clip of any simple ring against a convex region.
/// Concave subjects may come back with zero-width bridges, which do not
/// affect the area.
std::vector<Point2> clip_ring(std::span<const Point2> ring, const ConvexPolygon& clip);

double rotated_iou(const OrientedBox& a, const OrientedBox& b);

/// True when both boxes cover the same point set (handles the w/h swap with
/// a quarter-turn of theta).
bool same_point_set(const OrientedBox& a, const OrientedBox& b, double tol = 1e-9);

bool contains(const OrientedBox& box, Point2 p, double tol = 0.0);

/// Counter-clockwise convex hull (monotone chain), collinear points removed.
std::vector<Point2> convex_hull(std::span<const Point2> points);

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int width() const noexcept { return x1 - x0; }
    int height() const noexcept { return y1 - y0; }
    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Bounding rectangle of the box corners, padded by `padding` of its size on
/// every side, rounded outward and clamped to a width x height image. Empty
/// when the box lies fully outside.
PixelRect padded_crop(const OrientedBox& box, double padding, int width, int height);

/// Minimum-area enclosing rectangle by rotating calipers over the hull edges.
/// Returned with w >= h, i.e. w is the length and h the width.
/// Throws Error(degenerate_input) on < 3 points or collinear input.
OrientedBox min_area_rect(std::span<const Point2> points);

}  // namespace wheatai::geom
