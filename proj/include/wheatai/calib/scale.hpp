#pragma once

#include <span>
#include <string_view>

#include "wheatai/calib/fiducials.hpp"

namespace wheatai::calib {

enum class Unit { mm, um };
enum class CalibrationMethod { fiducial, scale_bar, manual };
enum class MeasureKind { length, area };

std::string_view unit_name(Unit u) noexcept;
std::string_view method_name(CalibrationMethod m) noexcept;

/// Pixels per physical unit, with provenance.
struct ScaleCalibration {
    double px_per_unit = 1.0;
    Unit unit = Unit::mm;
    CalibrationMethod method = CalibrationMethod::manual;
    double dispersion_cv = 0.0;
};

/// Per-side dispersion above this is rejected as an inconsistent scale.
inline constexpr double kMaxScaleDispersion = 0.05;

/// Mean of side_px / marker_side_mm over every side of every marker.
/// Throws no_fiducials, inconsistent_scale (cv > 0.05) or invalid_scale.
ScaleCalibration calibration_from_fiducials(std::span<const FiducialDetection> dets,
                                            double marker_side_mm);

/// Throws invalid_scale for non-positive or non-finite factors.
ScaleCalibration calibration_manual(double px_per_unit, Unit unit);

double convert_measurement(double value_px, MeasureKind kind, const ScaleCalibration& c);
double to_pixels(double value, MeasureKind kind, const ScaleCalibration& c);

}  // namespace wheatai::calib
