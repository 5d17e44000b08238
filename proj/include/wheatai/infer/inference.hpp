#pragma once

#include <span>
#include <vector>

#include "wheatai/detection.hpp"
#include "wheatai/infer/backend.hpp"
#include "wheatai/infer/types.hpp"

namespace wheatai::infer {

/// Drops detections below conf_thresh, then category-wise OBB NMS.
DetectionSet postprocess(const DetectionSet& raw, const InferenceParams& params);

struct BoxPrompt {
    std::size_t detection_index;
    geom::OrientedBox box;
};

std::vector<BoxPrompt> prompts_for(const DetectionSet& dets);

/// Ellipse inscribed in `box`, rasterised by pixel centre and clipped to the
/// image. May be empty when the box lies outside the image.
Bitmask inscribed_ellipse_mask(const geom::OrientedBox& box, int image_width, int image_height);

/// Box-prompted segmentation. Provider rings are clipped to the prompt box
/// (dilated by 1 px) and to the image. Without a provider ring the inscribed
/// ellipse is used, unless `strict`, which throws Error(missing_mask).
/// `backend` may be null, meaning no segmenter: every mask is synthesised.
std::vector<MaskSegment> segment(const Backend* backend, const std::string& image_ref,
                                 const std::string& role, int image_width, int image_height,
                                 std::span<const BoxPrompt> prompts, bool strict);

/// Throws Error(missing_verdict) when the provider has no verdict.
Verdict classify(const Backend& backend, const std::string& image_ref, const std::string& role,
                 std::size_t detection_index);

}  // namespace wheatai::infer
