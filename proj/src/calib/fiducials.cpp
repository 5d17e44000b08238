#include "wheatai/calib/fiducials.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>

#include <Eigen/Dense>
#include <opencv2/imgproc.hpp>

namespace wheatai::calib {

using geom::Point2;

namespace {

struct PixelXY {
    int x, y;
};

// Clockwise on screen (y down), starting east.
constexpr std::array<PixelXY, 8> kDirs{{{1, 0}, {1, 1}, {0, 1}, {-1, 1},
                                        {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};
constexpr int kWest = 4;

int direction_index(int dx, int dy) {
    for (int i = 0; i < 8; ++i) {
        if (kDirs[i].x == dx && kDirs[i].y == dy) return i;
    }
    return 0;
}

cv::Mat1b as_gray(const cv::Mat& image) {
    if (image.type() == CV_8UC1) return image;
    cv::Mat gray;
    if (image.channels() == 3) {
        cv::cvtColor(image, gray, cv::COLOR_BGR2GRAY);
    } else if (image.channels() == 4) {
        cv::cvtColor(image, gray, cv::COLOR_BGRA2GRAY);
    } else {
        image.convertTo(gray, CV_8U);
    }
    return gray;
}

/// Dark mask: pixel < mean of the surrounding window (clipped to the image)
/// minus `offset`. Window means come from an integral image.
std::vector<std::uint8_t> adaptive_dark_mask(const cv::Mat1b& gray, int window, double offset) {
    const int w = gray.cols, h = gray.rows;
    std::vector<std::int64_t> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0);
    const auto at = [&](int x, int y) -> std::int64_t& {
        return integral[static_cast<std::size_t>(y) * (w + 1) + x];
    };
    for (int y = 0; y < h; ++y) {
        std::int64_t row = 0;
        const std::uint8_t* src = gray.ptr<std::uint8_t>(y);
        for (int x = 0; x < w; ++x) {
            row += src[x];
            at(x + 1, y + 1) = at(x + 1, y) + row;
        }
    }
    const int r = window / 2;
    std::vector<std::uint8_t> dark(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - r), y1 = std::min(h, y + r + 1);
        const std::uint8_t* src = gray.ptr<std::uint8_t>(y);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - r), x1 = std::min(w, x + r + 1);
            const std::int64_t sum = at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
            const double mean = static_cast<double>(sum) / ((x1 - x0) * (y1 - y0));
            dark[static_cast<std::size_t>(y) * w + x] = src[x] < mean - offset ? 1 : 0;
        }
    }
    return dark;
}

struct Component {
    int label;
    PixelXY first;  // top-most, then left-most pixel
    int x0, y0, x1, y1;
};

std::vector<Component> label_components(const std::vector<std::uint8_t>& dark, int w, int h,
                                        std::vector<int>& labels) {
    labels.assign(dark.size(), 0);
    std::vector<Component> comps;
    std::vector<PixelXY> stack;
    int next = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (!dark[idx] || labels[idx] != 0) continue;
            Component c{++next, {x, y}, x, y, x, y};
            labels[idx] = c.label;
            stack.push_back({x, y});
            while (!stack.empty()) {
                const PixelXY p = stack.back();
                stack.pop_back();
                c.x0 = std::min(c.x0, p.x);
                c.x1 = std::max(c.x1, p.x);
                c.y0 = std::min(c.y0, p.y);
                c.y1 = std::max(c.y1, p.y);
                for (const PixelXY d : kDirs) {
                    const int nx = p.x + d.x, ny = p.y + d.y;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const std::size_t n = static_cast<std::size_t>(ny) * w + nx;
                    if (dark[n] && labels[n] == 0) {
                        labels[n] = c.label;
                        stack.push_back({nx, ny});
                    }
                }
            }
            comps.push_back(c);
        }
    }
    return comps;
}

/// Moore-neighbour tracing of a component's outer border with Jacob's
/// stopping criterion.
std::vector<PixelXY> trace_outer_border(const std::vector<int>& labels, int w, int h,
                                        const Component& comp) {
    const auto inside = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < w && y < h &&
               labels[static_cast<std::size_t>(y) * w + x] == comp.label;
    };
    std::vector<PixelXY> contour{comp.first};
    PixelXY p = comp.first;
    int back = kWest;
    const std::size_t limit = 4 * static_cast<std::size_t>(w) * h;
    for (std::size_t guard = 0; guard < limit; ++guard) {
        std::optional<PixelXY> found;
        int found_dir = 0;
        for (int i = 1; i <= 8; ++i) {
            const int d = (back + i) % 8;
            if (inside(p.x + kDirs[d].x, p.y + kDirs[d].y)) {
                found = PixelXY{p.x + kDirs[d].x, p.y + kDirs[d].y};
                found_dir = d;
                break;
            }
        }
        if (!found) break;  // isolated pixel
        const int prev = (found_dir + 7) % 8;
        const PixelXY b{p.x + kDirs[prev].x, p.y + kDirs[prev].y};
        if (p.x == comp.first.x && p.y == comp.first.y && contour.size() > 1 &&
            found->x == contour[1].x && found->y == contour[1].y) {
            break;
        }
        p = *found;
        back = direction_index(b.x - p.x, b.y - p.y);
        if (!(p.x == comp.first.x && p.y == comp.first.y)) {
            contour.push_back(p);
        }
    }
    return contour;
}

double point_segment_distance(Point2 p, Point2 a, Point2 b) {
    const Point2 ab = b - a;
    const double len2 = geom::dot(ab, ab);
    if (len2 == 0.0) return std::hypot(p.x - a.x, p.y - a.y);
    return std::abs(geom::cross(ab, p - a)) / std::sqrt(len2);
}

void douglas_peucker(const std::vector<Point2>& pts, std::size_t first, std::size_t last,
                     double eps, std::vector<std::size_t>& keep) {
    // Indices are taken modulo the contour size; `last` may wrap past the end.
    const std::size_t n = pts.size();
    double best = -1.0;
    std::size_t best_i = first;
    for (std::size_t i = first + 1; i < last; ++i) {
        const double d = point_segment_distance(pts[i % n], pts[first % n], pts[last % n]);
        if (d > best) {
            best = d;
            best_i = i;
        }
    }
    if (best > eps) {
        douglas_peucker(pts, first, best_i, eps, keep);
        keep.push_back(best_i % n);
        douglas_peucker(pts, best_i, last, eps, keep);
    }
}

/// Closed-contour polygon approximation; returns contour indices in order.
std::vector<std::size_t> approximate_closed(const std::vector<Point2>& pts, double eps) {
    const std::size_t n = pts.size();
    const auto farthest_from = [&](std::size_t from) {
        std::size_t best = from;
        double best_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = std::hypot(pts[i].x - pts[from].x, pts[i].y - pts[from].y);
            if (d > best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    };
    std::size_t a = farthest_from(0);
    std::size_t b = farthest_from(a);
    if (a > b) std::swap(a, b);
    std::vector<std::size_t> keep{a};
    douglas_peucker(pts, a, b, eps, keep);
    keep.push_back(b);
    douglas_peucker(pts, b, a + n, eps, keep);
    return keep;
}

struct Line {
    Point2 point;
    Point2 dir;
};

std::optional<Line> fit_line(const std::vector<Point2>& pts) {
    if (pts.size() < 2) return std::nullopt;
    Point2 mean{};
    for (const Point2& p : pts) mean = mean + p;
    mean = mean * (1.0 / static_cast<double>(pts.size()));
    double sxx = 0, sxy = 0, syy = 0;
    for (const Point2& p : pts) {
        const Point2 d = p - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    return Line{mean, {std::cos(angle), std::sin(angle)}};
}

std::optional<Point2> intersect(const Line& a, const Line& b) {
    const double denom = geom::cross(a.dir, b.dir);
    if (std::abs(denom) < 1e-9) return std::nullopt;
    const double t = geom::cross(b.point - a.point, b.dir) / denom;
    return a.point + a.dir * t;
}

/// Refines the coarse quad by fitting a line to each side's border pixels.
/// Border pixel centres sit on average max(|nx|, |ny|)/2 px inside the true
/// edge, so each line is pushed outward by that amount.
std::optional<std::array<Point2, 4>> refine_quad(const std::vector<Point2>& contour,
                                                 const std::array<std::size_t, 4>& vertex_idx) {
    const std::size_t n = contour.size();
    std::array<Line, 4> lines;
    for (int k = 0; k < 4; ++k) {
        const std::size_t from = vertex_idx[k];
        std::size_t to = vertex_idx[(k + 1) % 4];
        if (to <= from) to += n;
        const std::size_t len = to - from;
        const std::size_t trim = len * 15 / 100;
        std::vector<Point2> side;
        for (std::size_t i = from + trim; i <= to - trim; ++i) {
            side.push_back(contour[i % n] + Point2{0.5, 0.5});
        }
        auto line = fit_line(side);
        for (int iter = 0; iter < 2 && line; ++iter) {
            const Point2 normal{-line->dir.y, line->dir.x};
            std::vector<Point2> inliers;
            for (const Point2& p : side) {
                if (std::abs(geom::dot(p - line->point, normal)) <= 1.5) inliers.push_back(p);
            }
            if (inliers.size() < 2) break;
            line = fit_line(inliers);
        }
        if (!line) return std::nullopt;
        lines[k] = *line;
    }

    std::array<Point2, 4> coarse;
    for (int k = 0; k < 4; ++k) coarse[k] = contour[vertex_idx[k]] + Point2{0.5, 0.5};
    Point2 centre{};
    for (const Point2& p : coarse) centre = centre + p * 0.25;
    for (Line& line : lines) {
        Point2 normal{-line.dir.y, line.dir.x};
        if (geom::dot(line.point - centre, normal) < 0) normal = normal * -1.0;
        const double shift = 0.5 * std::max(std::abs(normal.x), std::abs(normal.y));
        line.point = line.point + normal * shift;
    }

    std::array<Point2, 4> refined;
    for (int k = 0; k < 4; ++k) {
        // Corner k joins side k-1 and side k.
        const auto p = intersect(lines[(k + 3) % 4], lines[k]);
        if (!p) return std::nullopt;
        if (std::hypot(p->x - coarse[k].x, p->y - coarse[k].y) > 4.0 + 0.1 * std::sqrt(n)) {
            return std::nullopt;
        }
        refined[k] = *p;
    }
    return refined;
}

bool is_convex(const std::array<Point2, 4>& q) {
    int sign = 0;
    for (int k = 0; k < 4; ++k) {
        const double c = geom::cross(q[(k + 1) % 4] - q[k], q[(k + 2) % 4] - q[(k + 1) % 4]);
        const int s = c > 0 ? 1 : (c < 0 ? -1 : 0);
        if (s == 0) return false;
        if (sign == 0) sign = s;
        if (s != sign) return false;
    }
    return true;
}

/// Homography taking the canonical square [0, side]^2 (corners listed
/// top-left, clockwise on screen) onto `quad`.
Eigen::Matrix3d square_to_quad(const std::array<Point2, 4>& quad, double side) {
    const std::array<Point2, 4> src{{{0, 0}, {side, 0}, {side, side}, {0, side}}};
    Eigen::Matrix<double, 8, 8> a;
    Eigen::Matrix<double, 8, 1> b;
    for (int i = 0; i < 4; ++i) {
        const double u = src[i].x, v = src[i].y, x = quad[i].x, y = quad[i].y;
        a.row(2 * i) << u, v, 1, 0, 0, 0, -u * x, -v * x;
        a.row(2 * i + 1) << 0, 0, 0, u, v, 1, -u * y, -v * y;
        b(2 * i) = x;
        b(2 * i + 1) = y;
    }
    const Eigen::Matrix<double, 8, 1> hv = a.partialPivLu().solve(b);
    Eigen::Matrix3d h;
    h << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), 1.0;
    return h;
}

double bilinear(const cv::Mat1b& gray, double x, double y) {
    // Pixel (i, j) is centred at (i + 0.5, j + 0.5).
    const double fx = std::clamp(x - 0.5, 0.0, gray.cols - 1.0);
    const double fy = std::clamp(y - 0.5, 0.0, gray.rows - 1.0);
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const int x1 = std::min(x0 + 1, gray.cols - 1), y1 = std::min(y0 + 1, gray.rows - 1);
    const double tx = fx - x0, ty = fy - y0;
    const double top = gray(y0, x0) * (1 - tx) + gray(y0, x1) * tx;
    const double bottom = gray(y1, x0) * (1 - tx) + gray(y1, x1) * tx;
    return top * (1 - ty) + bottom * ty;
}

/// Unwarps the quad to a canonical patch and reads the cell grid. Returns
/// the inner code, or nothing when the border is not solid black.
std::optional<std::uint32_t> read_code(const cv::Mat1b& gray, const std::array<Point2, 4>& quad,
                                       int bits, int patch_px) {
    const int cells = bits + 2;
    const int cell_px = patch_px / cells;
    const Eigen::Matrix3d h = square_to_quad(quad, static_cast<double>(cells * cell_px));

    cv::Mat1d patch(cells * cell_px, cells * cell_px);
    for (int v = 0; v < patch.rows; ++v) {
        for (int u = 0; u < patch.cols; ++u) {
            const Eigen::Vector3d p = h * Eigen::Vector3d(u + 0.5, v + 0.5, 1.0);
            patch(v, u) = bilinear(gray, p.x() / p.z(), p.y() / p.z());
        }
    }

    // Average the central part of each cell to stay clear of blurred edges.
    const int margin = std::max(1, cell_px / 4);
    std::vector<double> means(static_cast<std::size_t>(cells) * cells);
    for (int r = 0; r < cells; ++r) {
        for (int c = 0; c < cells; ++c) {
            double sum = 0;
            int count = 0;
            for (int v = r * cell_px + margin; v < (r + 1) * cell_px - margin; ++v) {
                for (int u = c * cell_px + margin; u < (c + 1) * cell_px - margin; ++u) {
                    sum += patch(v, u);
                    ++count;
                }
            }
            means[static_cast<std::size_t>(r) * cells + c] = sum / count;
        }
    }
    const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
    if (*hi - *lo < 20.0) return std::nullopt;
    const double threshold = 0.5 * (*lo + *hi);

    std::uint32_t code = 0;
    for (int r = 0; r < cells; ++r) {
        for (int c = 0; c < cells; ++c) {
            const bool white = means[static_cast<std::size_t>(r) * cells + c] > threshold;
            const bool border = r == 0 || c == 0 || r == cells - 1 || c == cells - 1;
            if (border) {
                if (white) return std::nullopt;
                continue;
            }
            if (white) {
                code |= 1u << (bits * bits - 1 - ((r - 1) * bits + (c - 1)));
            }
        }
    }
    return code;
}

}  // namespace

std::vector<FiducialDetection> detect_fiducials(const cv::Mat& image,
                                                const MarkerDictionary& dict,
                                                const FiducialDetectorConfig& config) {
    std::vector<FiducialDetection> out;
    if (image.empty() || image.cols < 64 || image.rows < 64) return out;
    const cv::Mat1b gray = as_gray(image);
    const int w = gray.cols, h = gray.rows;

    int window = static_cast<int>(std::min(w, h) * config.window_fraction);
    if (window % 2 == 0) ++window;
    window = std::max(window, 3);

    const auto dark = adaptive_dark_mask(gray, window, config.threshold_offset);
    std::vector<int> labels;
    const auto comps = label_components(dark, w, h, labels);

    const double min_area = config.min_side_px * config.min_side_px;
    for (const Component& comp : comps) {
        const int bw = comp.x1 - comp.x0 + 1, bh = comp.y1 - comp.y0 + 1;
        if (static_cast<double>(bw) * bh < min_area) continue;
        if (comp.x0 == 0 || comp.y0 == 0 || comp.x1 == w - 1 || comp.y1 == h - 1) continue;

        const auto border = trace_outer_border(labels, w, h, comp);
        if (border.size() < 16) continue;
        std::vector<Point2> contour;
        contour.reserve(border.size());
        for (const PixelXY p : border) contour.push_back({double(p.x), double(p.y)});

        auto idx = approximate_closed(contour, config.approx_accuracy * contour.size());
        if (idx.size() != 4) continue;
        std::array<std::size_t, 4> vertex_idx{idx[0], idx[1], idx[2], idx[3]};

        auto quad = refine_quad(contour, vertex_idx);
        if (!quad || !is_convex(*quad)) continue;
        if (geom::polygon_area(std::span<const Point2>(quad->data(), 4)) < min_area) continue;

        // Tracing runs clockwise on screen, which is a positive shoelace sum.
        double twice = 0;
        for (int k = 0; k < 4; ++k) twice += geom::cross((*quad)[k], (*quad)[(k + 1) % 4]);
        if (twice < 0) std::reverse(quad->begin(), quad->end());

        const auto code = read_code(gray, *quad, dict.bits_per_side(), config.canonical_patch_px);
        if (!code) continue;
        const auto match = dict.match(*code, config.max_bit_errors);
        if (!match) continue;

        FiducialDetection det;
        det.marker_id = match->id;
        for (int k = 0; k < 4; ++k) det.corners[k] = (*quad)[(k + match->rotation) % 4];
        for (int k = 0; k < 4; ++k) {
            const Point2 d = det.corners[(k + 1) % 4] - det.corners[k];
            det.side_lengths_px[k] = std::hypot(d.x, d.y);
        }
        out.push_back(det);
    }

    std::sort(out.begin(), out.end(), [](const FiducialDetection& a, const FiducialDetection& b) {
        if (a.marker_id != b.marker_id) return a.marker_id < b.marker_id;
        if (a.corners[0].y != b.corners[0].y) return a.corners[0].y < b.corners[0].y;
        return a.corners[0].x < b.corners[0].x;
    });
    return out;
}

}  // namespace wheatai::calib
