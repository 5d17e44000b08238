#pragma once

#include "wheatai/detection.hpp"

namespace wheatai::geom {

/// Greedy category-wise non-maximum suppression over oriented boxes.
///
/// Candidates are visited by descending confidence, ties by ascending
/// Detection::index (then input position), so permuting equal-confidence
/// inputs does not change which detections survive. A candidate is kept iff its rotated IoU with every
/// kept detection of the same category is below `iou_thresh`. Kept detections
/// are returned untouched and in their original relative order.
DetectionSet obb_nms(const DetectionSet& dets, double iou_thresh);

}  // namespace wheatai::geom
