#include "wheatai/infer/types.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "wheatai/error.hpp"

namespace wheatai::infer {

bool Bitmask::at(int x, int y) const {
    const int i = x - x0, j = y - y0;
    if (i < 0 || j < 0 || i >= width || j >= height) return false;
    return bits[static_cast<std::size_t>(j) * width + i] != 0;
}

std::size_t Bitmask::count() const {
    return static_cast<std::size_t>(
        std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

double pixel_area(const MaskSegment& mask) {
    if (const auto* ring = std::get_if<std::vector<geom::Point2>>(&mask.shape)) {
        return geom::polygon_area(*ring);
    }
    return static_cast<double>(std::get<Bitmask>(mask.shape).count());
}

std::string_view mask_source_name(MaskSource s) noexcept {
    return s == MaskSource::fixture ? "fixture" : "inscribed_ellipse";
}

std::string_view view_name(View v) noexcept {
    return v == View::frontal ? "frontal" : "lateral";
}

void InferenceParams::validate() const {
    if (!std::isfinite(conf_thresh) || conf_thresh < 0.0 || conf_thresh > 1.0) {
        throw Error(ErrorCode::invalid_params,
                    fmt::format("conf_thresh must be in [0, 1], got {}", conf_thresh));
    }
    if (!std::isfinite(nms_iou) || !(nms_iou > 0.0) || nms_iou > 1.0) {
        throw Error(ErrorCode::invalid_params,
                    fmt::format("nms_iou must be in (0, 1], got {}", nms_iou));
    }
}

}  // namespace wheatai::infer
