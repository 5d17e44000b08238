#include "wheatai/export/overlay.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "wheatai/error.hpp"

namespace wheatai::exporter {

namespace {

// BGR, chosen to stay distinguishable on green canopy and brown grain.
constexpr std::array<std::array<int, 3>, 8> kPalette{{
    {0, 0, 255},
    {255, 128, 0},
    {0, 215, 255},
    {255, 0, 255},
    {255, 255, 0},
    {0, 128, 255},
    {128, 0, 128},
    {255, 255, 255},
}};

cv::Point pixel(const geom::Point2& p) {
    // Keeps far-off corners inside int range; OpenCV clips the rest.
    const auto clampi = [](double v) { return static_cast<int>(std::lround(std::clamp(v, -1e6, 1e6))); };
    return {clampi(p.x), clampi(p.y)};
}

}  // namespace

cv::Scalar category_color(std::size_t index) {
    const auto& c = kPalette[index % kPalette.size()];
    return {static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2])};
}

cv::Mat render_overlay(const cv::Mat& image, const DetectionSet& dets, const OverlayStyle& style) {
    if (image.cols != dets.image_width || image.rows != dets.image_height) {
        throw Error(ErrorCode::dimension_mismatch,
                    fmt::format("image is {} x {} but detections of '{}' declare {} x {}", image.cols,
                                image.rows, dets.image_ref, dets.image_width, dets.image_height));
    }
    cv::Mat out;
    if (image.channels() == 1) {
        cv::cvtColor(image, out, cv::COLOR_GRAY2BGR);
    } else if (image.channels() == 4) {
        cv::cvtColor(image, out, cv::COLOR_BGRA2BGR);
    } else {
        out = image.clone();
    }
    std::set<std::string> categories;
    for (const Detection& d : dets.detections) categories.insert(d.category);

    for (const Detection& d : dets.detections) {
        const auto idx = static_cast<std::size_t>(std::distance(categories.begin(), categories.find(d.category)));
        const cv::Scalar color = category_color(idx);
        const geom::ConvexPolygon poly = geom::obb_corners(d.box);
        const auto& v = poly.vertices();
        for (std::size_t k = 0; k < v.size(); ++k) {
            cv::line(out, pixel(v[k]), pixel(v[(k + 1) % v.size()]), color, style.line_width, cv::LINE_8);
        }
        const auto top = std::min_element(v.begin(), v.end(), [](const geom::Point2& a, const geom::Point2& b) {
            return a.y < b.y || (a.y == b.y && a.x < b.x);
        });
        const cv::Point anchor = pixel(*top) + cv::Point(0, -4);
        cv::putText(out, fmt::format("{} {:.2f}", d.category, d.confidence), anchor,
                    cv::FONT_HERSHEY_SIMPLEX, style.font_scale, color, 1, cv::LINE_8);
    }
    return out;
}

cv::Rect crop_region(const Detection& det, double padding, int image_width, int image_height) {
    const geom::PixelRect r = geom::padded_crop(det.box, padding, image_width, image_height);
    return {r.x0, r.y0, r.width(), r.height()};
}

std::vector<std::filesystem::path> export_crops(const cv::Mat& image, const DetectionSet& dets,
                                                const std::string& image_stem,
                                                const std::filesystem::path& out_dir, double padding) {
    std::vector<std::filesystem::path> written;
    if (dets.empty()) return written;
    std::filesystem::create_directories(out_dir);
    for (const Detection& d : dets.detections) {
        const cv::Rect r = crop_region(d, padding, image.cols, image.rows);
        if (r.width <= 0 || r.height <= 0) continue;
        auto path = out_dir / fmt::format("{}_det{}.png", image_stem, d.index);
        write_png(path, image(r));
        written.push_back(std::move(path));
    }
    return written;
}

std::vector<unsigned char> encode_png(const cv::Mat& image) {
    std::vector<unsigned char> buf;
    if (!cv::imencode(".png", image, buf, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
        throw Error(ErrorCode::io_error, "PNG encoding failed");
    }
    return buf;
}

void write_png(const std::filesystem::path& path, const cv::Mat& image) {
    const auto buf = encode_png(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw Error(ErrorCode::io_error, fmt::format("cannot write '{}'", path.string()));
    }
}

}  // namespace wheatai::exporter
