#include "wheatai/infer/inference.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "wheatai/error.hpp"
#include "wheatai/geom/nms.hpp"

namespace wheatai::infer {

DetectionSet postprocess(const DetectionSet& raw, const InferenceParams& params) {
    params.validate();
    DetectionSet kept{raw.image_ref, raw.image_width, raw.image_height, {}};
    for (const Detection& d : raw.detections) {
        if (d.confidence >= params.conf_thresh) kept.detections.push_back(d);
    }
    return geom::obb_nms(kept, params.nms_iou);
}

std::vector<BoxPrompt> prompts_for(const DetectionSet& dets) {
    std::vector<BoxPrompt> out;
    out.reserve(dets.size());
    for (const Detection& d : dets.detections) out.push_back({d.index, d.box});
    return out;
}

Bitmask inscribed_ellipse_mask(const geom::OrientedBox& box, int image_width, int image_height) {
    const geom::ConvexPolygon poly = geom::obb_corners(box);
    const auto& corners = poly.vertices();
    double minx = corners[0].x, maxx = minx, miny = corners[0].y, maxy = miny;
    for (const geom::Point2& p : corners) {
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    const int x0 = std::clamp(static_cast<int>(std::floor(minx)), 0, image_width);
    const int y0 = std::clamp(static_cast<int>(std::floor(miny)), 0, image_height);
    const int x1 = std::clamp(static_cast<int>(std::ceil(maxx)), 0, image_width);
    const int y1 = std::clamp(static_cast<int>(std::ceil(maxy)), 0, image_height);

    Bitmask m{x0, y0, x1 - x0, y1 - y0, {}};
    m.bits.assign(static_cast<std::size_t>(m.width) * m.height, 0);
    const double c = std::cos(box.theta()), s = std::sin(box.theta());
    const double a = box.w() / 2.0, b = box.h() / 2.0;
    for (int j = 0; j < m.height; ++j) {
        for (int i = 0; i < m.width; ++i) {
            const double dx = x0 + i + 0.5 - box.cx();
            const double dy = y0 + j + 0.5 - box.cy();
            const double u = (c * dx + s * dy) / a;
            const double v = (-s * dx + c * dy) / b;
            if (u * u + v * v <= 1.0) m.bits[static_cast<std::size_t>(j) * m.width + i] = 1;
        }
    }
    return m;
}

std::vector<MaskSegment> segment(const Backend* backend, const std::string& image_ref,
                                 const std::string& role, int image_width, int image_height,
                                 std::span<const BoxPrompt> prompts, bool strict) {
    const geom::ConvexPolygon frame({{0, 0},
                                     {static_cast<double>(image_width), 0},
                                     {static_cast<double>(image_width), static_cast<double>(image_height)},
                                     {0, static_cast<double>(image_height)}});
    std::vector<MaskSegment> out;
    out.reserve(prompts.size());
    for (const BoxPrompt& prompt : prompts) {
        std::optional<std::vector<geom::Point2>> ring;
        if (backend != nullptr) ring = backend->mask(image_ref, role, prompt.detection_index);
        if (ring) {
            const geom::OrientedBox& b = prompt.box;
            const auto dilated = geom::obb_corners({b.cx(), b.cy(), b.w() + 2, b.h() + 2, b.theta()});
            std::vector<geom::Point2> clipped = geom::clip_ring(geom::clip_ring(*ring, dilated), frame);
            if (geom::polygon_area(clipped) > 0.0) {
                out.push_back({prompt.detection_index, std::move(clipped), MaskSource::fixture});
                continue;
            }
        }
        if (strict) {
            throw Error(ErrorCode::missing_mask,
                        fmt::format("no '{}' mask for detection {} of image '{}'", role,
                                    prompt.detection_index, image_ref));
        }
        out.push_back({prompt.detection_index,
                       inscribed_ellipse_mask(prompt.box, image_width, image_height),
                       MaskSource::inscribed_ellipse});
    }
    return out;
}

Verdict classify(const Backend& backend, const std::string& image_ref, const std::string& role,
                 std::size_t detection_index) {
    auto v = backend.verdict(image_ref, role, detection_index);
    if (!v) {
        throw Error(ErrorCode::missing_verdict,
                    fmt::format("no '{}' verdict for detection {} of image '{}'", role,
                                detection_index, image_ref));
    }
    return *v;
}

}  // namespace wheatai::infer
