#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "wheatai/geom/geometry.hpp"

namespace wheatai::infer {

/// Binary raster mask in image coordinates. Pixel (x0 + i, y0 + j) is set
/// when bits[j * width + i] != 0; its centre is at (x + 0.5, y + 0.5).
struct Bitmask {
    int x0 = 0;
    int y0 = 0;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    bool at(int x, int y) const;
    std::size_t count() const;
};

enum class MaskSource { fixture, inscribed_ellipse };
std::string_view mask_source_name(MaskSource s) noexcept;

struct MaskSegment {
    std::size_t detection_index = 0;
    // Polygon rings are simple but not necessarily convex.
    std::variant<std::vector<geom::Point2>, Bitmask> shape;
    MaskSource source = MaskSource::fixture;
};

/// Pixel count for rasters, shoelace area for rings.
double pixel_area(const MaskSegment& mask);

enum class View { frontal, lateral };
std::string_view view_name(View v) noexcept;

struct Verdict {
    std::size_t detection_index = 0;
    bool keep = false;
    std::optional<View> view;
};

struct InferenceParams {
    double conf_thresh = 0.25;
    double nms_iou = 0.30;
    std::string role;

    /// Throws Error(invalid_params) when a field is out of range.
    void validate() const;
};

}  // namespace wheatai::infer
