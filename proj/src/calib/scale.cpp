#include "wheatai/calib/scale.hpp"

#include <cmath>

#include <fmt/format.h>

#include "wheatai/error.hpp"

namespace wheatai::calib {

std::string_view unit_name(Unit u) noexcept {
    return u == Unit::mm ? "mm" : "um";
}

std::string_view method_name(CalibrationMethod m) noexcept {
    switch (m) {
        case CalibrationMethod::fiducial: return "fiducial";
        case CalibrationMethod::scale_bar: return "scale_bar";
        case CalibrationMethod::manual: return "manual";
    }
    return "manual";
}

ScaleCalibration calibration_from_fiducials(std::span<const FiducialDetection> dets,
                                            double marker_side_mm) {
    if (dets.empty()) {
        throw Error(ErrorCode::no_fiducials, "no fiducial markers detected");
    }
    if (!std::isfinite(marker_side_mm) || !(marker_side_mm > 0.0)) {
        throw Error(ErrorCode::invalid_scale,
                    fmt::format("marker side must be positive, got {}", marker_side_mm));
    }
    std::vector<double> estimates;
    estimates.reserve(dets.size() * 4);
    for (const FiducialDetection& d : dets) {
        for (double side : d.side_lengths_px) estimates.push_back(side / marker_side_mm);
    }
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= static_cast<double>(estimates.size());
    double var = 0.0;
    for (double e : estimates) var += (e - mean) * (e - mean);
    var /= static_cast<double>(estimates.size());
    const double cv = std::sqrt(var) / mean;
    if (cv > kMaxScaleDispersion) {
        throw Error(ErrorCode::inconsistent_scale,
                    fmt::format("fiducial scale estimates disagree (cv {:.4f} > {})", cv,
                                kMaxScaleDispersion));
    }
    return {mean, Unit::mm, CalibrationMethod::fiducial, cv};
}

ScaleCalibration calibration_manual(double px_per_unit, Unit unit) {
    if (!std::isfinite(px_per_unit) || !(px_per_unit > 0.0)) {
        throw Error(ErrorCode::invalid_scale,
                    fmt::format("pixels per unit must be positive, got {}", px_per_unit));
    }
    return {px_per_unit, unit, CalibrationMethod::manual, 0.0};
}

double convert_measurement(double value_px, MeasureKind kind, const ScaleCalibration& c) {
    return kind == MeasureKind::length ? value_px / c.px_per_unit
                                       : value_px / (c.px_per_unit * c.px_per_unit);
}

double to_pixels(double value, MeasureKind kind, const ScaleCalibration& c) {
    return kind == MeasureKind::length ? value * c.px_per_unit
                                       : value * (c.px_per_unit * c.px_per_unit);
}

}  // namespace wheatai::calib
