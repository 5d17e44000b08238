#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "wheatai/detection.hpp"

namespace wheatai::exporter {

struct OverlayStyle {
    int line_width = 2;
    double font_scale = 0.5;
};

/// Colour (BGR) for position `index` in the sorted category list.
cv::Scalar category_color(std::size_t index);

/// Draws every detection's corner polygon and a "category conf" label at its
/// top-most corner. Categories are coloured by their index in the sorted set
/// of categories present. Throws Error(dimension_mismatch) when the image
/// size differs from the set's declared size.
cv::Mat render_overlay(const cv::Mat& image, const DetectionSet& dets, const OverlayStyle& style = {});

/// Axis-aligned crop rectangle of a detection: corner bounds padded by
/// `padding` of their size per side, rounded outward, clamped to the image.
cv::Rect crop_region(const Detection& det, double padding, int image_width, int image_height);

/// Writes `<image_stem>_det<index>.png` per detection with a non-empty crop.
std::vector<std::filesystem::path> export_crops(const cv::Mat& image, const DetectionSet& dets,
                                                const std::string& image_stem,
                                                const std::filesystem::path& out_dir,
                                                double padding = 0.1);

/// PNG bytes with fixed encoder settings.
std::vector<unsigned char> encode_png(const cv::Mat& image);
void write_png(const std::filesystem::path& path, const cv::Mat& image);

}  // namespace wheatai::exporter
