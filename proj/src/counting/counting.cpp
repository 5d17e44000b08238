#include "wheatai/counting/counting.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "wheatai/error.hpp"
#include "wheatai/infer/inference.hpp"

namespace wheatai::counting {

namespace {

infer::InferenceParams with_role(infer::InferenceParams p, const char* fallback) {
    if (p.role.empty()) p.role = fallback;
    return p;
}

std::vector<int> tile_origins(int length, int tile_size, int stride) {
    std::vector<int> origins{0};
    while (origins.back() + tile_size < length) origins.push_back(origins.back() + stride);
    return origins;
}

}  // namespace

std::string tile_role(int x0, int y0) {
    return fmt::format("spike@{}_{}", x0, y0);
}

SpikeCountResult count_spikes(const std::string& image_ref, const infer::Backend& backend,
                              const infer::InferenceParams& params,
                              std::optional<double> gsd_mm_per_px) {
    const auto p = with_role(params, "spike");
    SpikeCountResult r;
    r.image_ref = image_ref;
    r.detections = infer::postprocess(backend.detect(image_ref, p.role), p);
    r.spike_count = r.detections.count_category("spike");
    r.spikes_per_m2 = spikes_per_area(r.spike_count, gsd_mm_per_px, r.detections.image_width,
                                      r.detections.image_height);
    return r;
}

TileGrid plan_tiles(int width, int height, int tile_size, int overlap) {
    if (overlap < 0 || tile_size <= overlap) {
        throw Error(ErrorCode::invalid_tiling,
                    fmt::format("tiling needs tile_size > overlap >= 0, got tile {} overlap {}",
                                tile_size, overlap));
    }
    if (width <= 0 || height <= 0) {
        throw Error(ErrorCode::invalid_tiling,
                    fmt::format("cannot tile an empty image ({} x {})", width, height));
    }
    const int stride = tile_size - overlap;
    const auto xs = tile_origins(width, tile_size, stride);
    const auto ys = tile_origins(height, tile_size, stride);
    TileGrid grid{tile_size, overlap, static_cast<int>(xs.size()), static_cast<int>(ys.size()), {}};
    for (int y0 : ys) {
        for (int x0 : xs) {
            grid.tiles.push_back({x0, y0, std::min(x0 + tile_size, width), std::min(y0 + tile_size, height)});
        }
    }
    return grid;
}

DetectionSet tile_and_merge(const std::string& image_ref, const TileGrid& grid,
                            const infer::Backend& backend, const infer::InferenceParams& params) {
    DetectionSet merged{image_ref, 0, 0, {}};
    for (const Tile& t : grid.tiles) {
        merged.image_width = std::max(merged.image_width, t.x1);
        merged.image_height = std::max(merged.image_height, t.y1);
    }
    for (const Tile& t : grid.tiles) {
        const DetectionSet local = backend.detect(image_ref, tile_role(t.x0, t.y0));
        for (const Detection& d : local.detections) {
            Detection g = d;
            g.box = d.box.translated(t.x0, t.y0);
            g.index = merged.detections.size();
            g.out_of_frame = g.box.cx() < 0 || g.box.cy() < 0 || g.box.cx() > merged.image_width ||
                             g.box.cy() > merged.image_height;
            merged.detections.push_back(std::move(g));
        }
    }
    return infer::postprocess(merged, params);
}

std::optional<double> spikes_per_area(std::size_t count, std::optional<double> gsd_mm_per_px,
                                      int width, int height) {
    if (!gsd_mm_per_px) return std::nullopt;
    const double gsd = *gsd_mm_per_px;
    if (!std::isfinite(gsd) || !(gsd > 0.0)) {
        throw Error(ErrorCode::invalid_params, fmt::format("gsd must be positive, got {}", gsd));
    }
    const double area_m2 = static_cast<double>(width) * height * gsd * gsd / 1e6;
    return static_cast<double>(count) / area_m2;
}

SpikeletAssignment associate_spikelets(const DetectionSet& spikes, const DetectionSet& spikelets,
                                       double tau) {
    SpikeletAssignment out;
    std::vector<geom::ConvexPolygon> spike_polys;
    spike_polys.reserve(spikes.size());
    for (const Detection& s : spikes.detections) {
        out.per_spike_counts[s.index] = 0;
        spike_polys.push_back(geom::obb_corners(s.box));
    }
    for (const Detection& let : spikelets.detections) {
        const geom::ConvexPolygon poly = geom::obb_corners(let.box);
        const double area = let.box.area();
        double best = -1.0;
        std::optional<std::size_t> best_spike;
        for (std::size_t k = 0; k < spikes.size(); ++k) {
            const double ratio =
                geom::polygon_area(geom::convex_intersection(poly, spike_polys[k])) / area;
            const std::size_t idx = spikes.detections[k].index;
            if (ratio > best || (ratio == best && best_spike && idx < *best_spike)) {
                best = ratio;
                best_spike = idx;
            }
        }
        if (best_spike && best >= tau) {
            ++out.per_spike_counts[*best_spike];
            out.spike_of[let.index] = *best_spike;
        } else {
            out.unassigned.push_back(let.index);
        }
    }
    std::sort(out.unassigned.begin(), out.unassigned.end());
    return out;
}

}  // namespace wheatai::counting
