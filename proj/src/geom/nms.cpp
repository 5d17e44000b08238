#include "wheatai/geom/nms.hpp"

#include <algorithm>
#include <numeric>

namespace wheatai {

std::size_t DetectionSet::count_category(const std::string& category) const {
    return static_cast<std::size_t>(std::count_if(
        detections.begin(), detections.end(),
        [&](const Detection& d) { return d.category == category; }));
}

}  // namespace wheatai

namespace wheatai::geom {

DetectionSet obb_nms(const DetectionSet& dets, double iou_thresh) {
    const auto& in = dets.detections;
    std::vector<std::size_t> order(in.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (in[a].confidence != in[b].confidence) {
            return in[a].confidence > in[b].confidence;
        }
        return in[a].index < in[b].index;
    });

    std::vector<bool> keep(in.size(), false);
    std::vector<std::size_t> kept;
    for (std::size_t cand : order) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
            return in[k].category == in[cand].category &&
                   rotated_iou(in[k].box, in[cand].box) >= iou_thresh;
        });
        if (!suppressed) {
            kept.push_back(cand);
            keep[cand] = true;
        }
    }

    DetectionSet out{dets.image_ref, dets.image_width, dets.image_height, {}};
    out.detections.reserve(kept.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (keep[i]) {
            out.detections.push_back(in[i]);
        }
    }
    return out;
}

}  // namespace wheatai::geom
