#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "wheatai/calib/scale.hpp"
#include "wheatai/detection.hpp"
#include "wheatai/infer/backend.hpp"
#include "wheatai/infer/types.hpp"
#include "wheatai/warning.hpp"

namespace wheatai::morpho {

using Rational = boost::multiprecision::cpp_rational;

inline constexpr double kDefaultOpenThreshold = 0.3;
// Raster masks below this pixel count are degenerate.
inline constexpr std::size_t kMinMaskPixels = 16;
// Smoothing applied before tracing a raster mask's sub-pixel boundary.
inline constexpr double kBoundarySigmaPx = 1.5;

struct MaskDimensions {
    double length = 0;
    double width = 0;
    double area = 0;
};

struct KernelRecord {
    std::size_t kernel_index = 0;
    std::string category;  // healthy, damaged or unknown
    double length_mm = 0;
    double width_mm = 0;
    double area_mm2 = 0;
    infer::MaskSource mask_source = infer::MaskSource::fixture;
};

struct SummaryStat {
    double mean = 0;
    double stddev = 0;  // population
};

struct MorphometricsSummary {
    std::size_t n = 0;
    SummaryStat length_mm, width_mm, area_mm2;
};

struct KernelMorphResult {
    DetectionSet kernels;
    std::vector<KernelRecord> records;
    std::optional<MorphometricsSummary> summary;
    Warnings warnings;
};

struct PoreAssociation {
    std::map<std::size_t, std::size_t> pore_of;  // stoma index -> pore index
    std::vector<std::size_t> duplicate;           // pores inside an already matched stoma
    std::vector<std::size_t> unassigned;          // pores inside no stoma
};

struct StomaRecord {
    std::size_t stoma_index = 0;
    double stoma_area_um2 = 0;
    std::optional<std::size_t> pore_index;
    std::optional<double> pore_length_um;
    std::optional<double> pore_width_um;
    std::optional<double> pore_area_um2;
    std::optional<double> aperture_ratio;
    std::optional<bool> open_flag;
    infer::MaskSource mask_source = infer::MaskSource::fixture;
};

struct StomataSummary {
    std::size_t stomata_count = 0;
    Rational fov_area_mm2;
    Rational density_per_mm2;
    std::optional<double> mean_aperture_ratio;
};

struct StomataResult {
    DetectionSet stomata;
    DetectionSet pores;
    std::vector<StomaRecord> records;
    StomataSummary summary;
    Warnings warnings;
};

/// Points the enclosing rectangle is fitted to. Rings give their vertices;
/// rasters give the 0.5 iso-contour of the mask smoothed with
/// kBoundarySigmaPx, or pixel-edge midpoints when smoothing erases it.
std::vector<geom::Point2> mask_boundary_points(const infer::MaskSegment& mask);

/// Length and width from the minimum-area rectangle of the boundary points,
/// area from pixel count or ring area, all in calibrated units.
/// Throws Error(degenerate_mask).
MaskDimensions mask_dimensions(const infer::MaskSegment& mask, const calib::ScaleCalibration& c);

SummaryStat summarize(const std::vector<double>& values);

/// Kernels (role `kernel`) segmented by the same backend, non-strict.
/// Throws Error(no_kernels) or Error(invalid_calibration) for a non-mm scale.
KernelMorphResult kernel_morphometrics(const std::string& image_ref, const infer::Backend& backend,
                                       const infer::InferenceParams& params,
                                       const calib::ScaleCalibration& c);

/// A pore belongs to the stoma whose box contains its centre (nearest stoma
/// centre when several do, then lower index). Per stoma the most confident
/// pore wins, ties to the lower index.
PoreAssociation associate_pores(const DetectionSet& stomata, const DetectionSet& pores);

/// Field of view in mm^2: (W / p) * (H / p) * 1e-6 with p in px/um.
Rational fov_area_mm2(int width, int height, double px_per_um);

/// Throws Error(no_stomata) or Error(invalid_calibration) for a non-um scale.
StomataResult stomata_morphometrics(const std::string& image_ref, const infer::Backend& backend,
                                    const infer::InferenceParams& params,
                                    const calib::ScaleCalibration& c,
                                    double open_thresh = kDefaultOpenThreshold,
                                    const infer::Backend* seg_backend = nullptr);

}  // namespace wheatai::morpho
