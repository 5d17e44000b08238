#include "wheatai/morpho/morpho.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <opencv2/imgproc.hpp>

#include "wheatai/error.hpp"
#include "wheatai/infer/inference.hpp"

namespace wheatai::morpho {

namespace {

infer::InferenceParams with_role(infer::InferenceParams p, const char* role) {
    p.role = role;
    return p;
}

std::vector<geom::Point2> edge_midpoints(const infer::Bitmask& m) {
    std::vector<geom::Point2> pts;
    for (int j = 0; j < m.height; ++j) {
        for (int i = 0; i < m.width; ++i) {
            const int x = m.x0 + i, y = m.y0 + j;
            if (!m.at(x, y)) continue;
            if (!m.at(x - 1, y)) pts.push_back({static_cast<double>(x), y + 0.5});
            if (!m.at(x + 1, y)) pts.push_back({x + 1.0, y + 0.5});
            if (!m.at(x, y - 1)) pts.push_back({x + 0.5, static_cast<double>(y)});
            if (!m.at(x, y + 1)) pts.push_back({x + 0.5, y + 1.0});
        }
    }
    return pts;
}

// Linear crossings of the 0.5 level between 4-neighbour pixel centres.
std::vector<geom::Point2> smoothed_contour(const infer::Bitmask& m) {
    const int pad = static_cast<int>(std::ceil(4 * kBoundarySigmaPx)) + 1;
    cv::Mat1f f(m.height + 2 * pad, m.width + 2 * pad, 0.0f);
    for (int j = 0; j < m.height; ++j) {
        for (int i = 0; i < m.width; ++i) {
            if (m.bits[static_cast<std::size_t>(j) * m.width + i]) f(j + pad, i + pad) = 1.0f;
        }
    }
    cv::GaussianBlur(f, f, cv::Size(0, 0), kBoundarySigmaPx, kBoundarySigmaPx, cv::BORDER_CONSTANT);
    const double ox = m.x0 - pad + 0.5, oy = m.y0 - pad + 0.5;
    std::vector<geom::Point2> pts;
    for (int r = 0; r < f.rows; ++r) {
        for (int c = 0; c < f.cols; ++c) {
            const double a = f(r, c) - 0.5;
            if (c + 1 < f.cols) {
                const double b = f(r, c + 1) - 0.5;
                if ((a < 0) != (b < 0)) pts.push_back({ox + c + a / (a - b), oy + r});
            }
            if (r + 1 < f.rows) {
                const double b = f(r + 1, c) - 0.5;
                if ((a < 0) != (b < 0)) pts.push_back({ox + c, oy + r + a / (a - b)});
            }
        }
    }
    return pts;
}

bool spans_area(const std::vector<geom::Point2>& pts) {
    return pts.size() >= 3 && geom::polygon_area(geom::convex_hull(pts)) > 0.0;
}

[[noreturn]] void degenerate(const infer::MaskSegment& mask, const std::string& why) {
    throw Error(ErrorCode::degenerate_mask,
                fmt::format("mask of detection {} is degenerate: {}", mask.detection_index, why));
}

void require_unit(const calib::ScaleCalibration& c, calib::Unit unit, const char* what) {
    if (c.unit != unit || !std::isfinite(c.px_per_unit) || !(c.px_per_unit > 0)) {
        throw Error(ErrorCode::invalid_calibration,
                    fmt::format("{} needs a positive px/{} calibration, got {} px/{}", what,
                                calib::unit_name(unit), c.px_per_unit, calib::unit_name(c.unit)));
    }
}

}  // namespace

std::vector<geom::Point2> mask_boundary_points(const infer::MaskSegment& mask) {
    if (const auto* ring = std::get_if<std::vector<geom::Point2>>(&mask.shape)) return *ring;
    const auto& bm = std::get<infer::Bitmask>(mask.shape);
    auto pts = smoothed_contour(bm);
    if (!spans_area(pts)) pts = edge_midpoints(bm);
    return pts;
}

MaskDimensions mask_dimensions(const infer::MaskSegment& mask, const calib::ScaleCalibration& c) {
    if (const auto* bm = std::get_if<infer::Bitmask>(&mask.shape)) {
        if (bm->count() < kMinMaskPixels) {
            degenerate(mask, fmt::format("{} px < {}", bm->count(), kMinMaskPixels));
        }
    }
    const auto pts = mask_boundary_points(mask);
    const double area_px = infer::pixel_area(mask);
    if (!spans_area(pts) || !(area_px > 0)) degenerate(mask, "no enclosed area");
    const geom::OrientedBox rect = geom::min_area_rect(pts);
    using calib::MeasureKind;
    return {calib::convert_measurement(rect.w(), MeasureKind::length, c),
            calib::convert_measurement(rect.h(), MeasureKind::length, c),
            calib::convert_measurement(area_px, MeasureKind::area, c)};
}

SummaryStat summarize(const std::vector<double>& values) {
    if (values.empty()) return {};
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / n)};
}

KernelMorphResult kernel_morphometrics(const std::string& image_ref, const infer::Backend& backend,
                                       const infer::InferenceParams& params,
                                       const calib::ScaleCalibration& c) {
    require_unit(c, calib::Unit::mm, "kernel morphometrics");
    const auto p = with_role(params, "kernel");
    KernelMorphResult out;
    out.kernels = infer::postprocess(backend.detect(image_ref, p.role), p);
    if (out.kernels.empty()) {
        throw Error(ErrorCode::no_kernels, fmt::format("no kernels detected in image '{}'", image_ref));
    }
    const auto prompts = infer::prompts_for(out.kernels);
    const auto masks = infer::segment(&backend, image_ref, p.role, out.kernels.image_width,
                                      out.kernels.image_height, prompts, false);
    std::vector<double> lengths, widths, areas;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const Detection& d = out.kernels.detections[i];
        MaskDimensions dims;
        try {
            dims = mask_dimensions(masks[i], c);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::degenerate_mask) throw;
            out.warnings.push_back({"degenerate_mask", e.what()});
            continue;
        }
        const bool graded = d.category == "healthy" || d.category == "damaged";
        out.records.push_back({d.index, graded ? d.category : "unknown", dims.length, dims.width,
                               dims.area, masks[i].source});
        lengths.push_back(dims.length);
        widths.push_back(dims.width);
        areas.push_back(dims.area);
    }
    if (!out.records.empty()) {
        out.summary = MorphometricsSummary{out.records.size(), summarize(lengths), summarize(widths),
                                           summarize(areas)};
    }
    return out;
}

PoreAssociation associate_pores(const DetectionSet& stomata, const DetectionSet& pores) {
    PoreAssociation out;
    std::map<std::size_t, std::vector<const Detection*>> candidates;
    for (const Detection& pore : pores.detections) {
        const Detection* host = nullptr;
        double best = 0;
        for (const Detection& s : stomata.detections) {
            if (!geom::contains(s.box, pore.box.center())) continue;
            const geom::Point2 d = s.box.center() - pore.box.center();
            const double dist = geom::dot(d, d);
            if (host == nullptr || dist < best || (dist == best && s.index < host->index)) {
                host = &s;
                best = dist;
            }
        }
        if (host == nullptr) {
            out.unassigned.push_back(pore.index);
        } else {
            candidates[host->index].push_back(&pore);
        }
    }
    for (auto& [stoma, list] : candidates) {
        std::stable_sort(list.begin(), list.end(), [](const Detection* a, const Detection* b) {
            return a->confidence > b->confidence ||
                   (a->confidence == b->confidence && a->index < b->index);
        });
        out.pore_of[stoma] = list.front()->index;
        for (std::size_t k = 1; k < list.size(); ++k) out.duplicate.push_back(list[k]->index);
    }
    std::sort(out.duplicate.begin(), out.duplicate.end());
    std::sort(out.unassigned.begin(), out.unassigned.end());
    return out;
}

Rational fov_area_mm2(int width, int height, double px_per_um) {
    const Rational p(px_per_um);
    return Rational(width) * Rational(height) / (p * p) / 1000000;
}

StomataResult stomata_morphometrics(const std::string& image_ref, const infer::Backend& backend,
                                    const infer::InferenceParams& params,
                                    const calib::ScaleCalibration& c, double open_thresh,
                                    const infer::Backend* seg_backend) {
    require_unit(c, calib::Unit::um, "stomata morphometrics");
    if (!std::isfinite(open_thresh) || open_thresh < 0 || open_thresh > 1) {
        throw Error(ErrorCode::invalid_params,
                    fmt::format("open_thresh must be in [0, 1], got {}", open_thresh));
    }
    StomataResult out;
    const auto sp = with_role(params, "stoma");
    const auto pp = with_role(params, "pore");
    out.stomata = infer::postprocess(backend.detect(image_ref, sp.role), sp);
    if (out.stomata.empty()) {
        throw Error(ErrorCode::no_stomata, fmt::format("no stomata detected in image '{}'", image_ref));
    }
    out.pores = infer::postprocess(backend.detect(image_ref, pp.role), pp);
    const PoreAssociation assoc = associate_pores(out.stomata, out.pores);
    for (std::size_t idx : assoc.duplicate) {
        out.warnings.push_back({"duplicate_pore", fmt::format("pore {} shares a stoma with a more confident pore", idx)});
    }
    for (std::size_t idx : assoc.unassigned) {
        out.warnings.push_back({"unassigned_pore", fmt::format("pore {} lies in no stoma", idx)});
    }

    const int w = out.stomata.image_width, h = out.stomata.image_height;
    const auto stoma_masks =
        infer::segment(seg_backend, image_ref, sp.role, w, h, infer::prompts_for(out.stomata), false);
    std::map<std::size_t, const Detection*> pore_by_index;
    for (const Detection& d : out.pores.detections) pore_by_index[d.index] = &d;

    using calib::MeasureKind;
    std::vector<double> ratios;
    for (std::size_t i = 0; i < out.stomata.size(); ++i) {
        StomaRecord r;
        r.stoma_index = out.stomata.detections[i].index;
        r.mask_source = stoma_masks[i].source;
        r.stoma_area_um2 = calib::convert_measurement(infer::pixel_area(stoma_masks[i]), MeasureKind::area, c);
        const auto hit = assoc.pore_of.find(r.stoma_index);
        if (hit != assoc.pore_of.end()) {
            const Detection& pore = *pore_by_index.at(hit->second);
            const infer::BoxPrompt prompt{pore.index, pore.box};
            const auto pm = infer::segment(seg_backend, image_ref, pp.role, w, h, {&prompt, 1}, false);
            try {
                const MaskDimensions dims = mask_dimensions(pm.front(), c);
                r.pore_index = pore.index;
                r.pore_length_um = dims.length;
                r.pore_width_um = dims.width;
                r.pore_area_um2 = dims.area;
                r.aperture_ratio = dims.width / dims.length;
                r.open_flag = *r.aperture_ratio >= open_thresh;
                ratios.push_back(*r.aperture_ratio);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::degenerate_mask) throw;
                out.warnings.push_back({"degenerate_mask", e.what()});
            }
        }
        out.records.push_back(r);
    }
    out.summary.stomata_count = out.records.size();
    out.summary.fov_area_mm2 = fov_area_mm2(w, h, c.px_per_unit);
    out.summary.density_per_mm2 =
        Rational(static_cast<unsigned long long>(out.summary.stomata_count)) / out.summary.fov_area_mm2;
    if (!ratios.empty()) out.summary.mean_aperture_ratio = summarize(ratios).mean;
    return out;
}

}  // namespace wheatai::morpho
