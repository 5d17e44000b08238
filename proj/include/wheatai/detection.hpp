#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wheatai/geom/geometry.hpp"

namespace wheatai {

/// One oriented-box prediction.
struct Detection {
    geom::OrientedBox box;
    std::string category;
    double confidence = 0.0;
    // Position in the backend's raw output. Masks, verdicts, crops and exported
    // record indices all refer to this, so it survives filtering.
    std::size_t index = 0;
    // Center lies outside [0, width] x [0, height]; the record is kept.
    bool out_of_frame = false;
};

struct DetectionSet {
    std::string image_ref;
    int image_width = 0;
    int image_height = 0;
    std::vector<Detection> detections;

    std::size_t size() const noexcept { return detections.size(); }
    bool empty() const noexcept { return detections.empty(); }
    std::size_t count_category(const std::string& category) const;
};

}  // namespace wheatai
