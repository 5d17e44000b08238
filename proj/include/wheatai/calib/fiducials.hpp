#pragma once

#include <array>
#include <vector>

#include <opencv2/core.hpp>

#include "wheatai/calib/dictionary.hpp"
#include "wheatai/geom/geometry.hpp"

namespace wheatai::calib {

struct FiducialDetection {
    int marker_id = -1;
    // Marker top-left first, then clockwise on screen.
    std::array<geom::Point2, 4> corners{};
    std::array<double, 4> side_lengths_px{};
};

struct FiducialDetectorConfig {
    // Adaptive threshold window as a fraction of the smaller image side;
    // forced odd, at least 3.
    double window_fraction = 1.0 / 8.0;
    // Pixel is dark when below (window mean - offset).
    double threshold_offset = 7.0;
    double min_side_px = 32.0;
    // Douglas-Peucker tolerance relative to the contour length.
    double approx_accuracy = 0.03;
    int canonical_patch_px = 60;
    int max_bit_errors = 1;
};

/// Finds square fiducials in an 8-bit grayscale image (3-channel input is
/// converted). Images smaller than 64x64 yield no detections.
std::vector<FiducialDetection> detect_fiducials(const cv::Mat& image,
                                                const MarkerDictionary& dict,
                                                const FiducialDetectorConfig& config = {});

}  // namespace wheatai::calib
