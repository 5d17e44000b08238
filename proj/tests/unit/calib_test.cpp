#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "../support/marker_render.hpp"
#include "wheatai/calib/dictionary.hpp"
#include "wheatai/calib/fiducials.hpp"
#include "wheatai/calib/scale.hpp"
#include "wheatai/error.hpp"

using namespace wheatai;
using namespace wheatai::calib;

namespace {

const MarkerDictionary& dict() {
    return MarkerDictionary::aruco_4x4_50();
}

double corner_rmse(const FiducialDetection& det, const wheatai::testing::RenderedMarker& truth) {
    double sum = 0;
    for (int k = 0; k < 4; ++k) {
        const double dx = det.corners[k].x - truth.corners[k][0];
        const double dy = det.corners[k].y - truth.corners[k][1];
        sum += dx * dx + dy * dy;
    }
    return std::sqrt(sum / 4);
}

FiducialDetection fake_marker(double side) {
    FiducialDetection d;
    d.marker_id = 0;
    d.side_lengths_px = {side, side, side, side};
    return d;
}

}  // namespace

TEST(MarkerDictionary, BundledDictionaryShape) {
    EXPECT_EQ(dict().name(), "aruco_4x4_50");
    EXPECT_EQ(dict().bits_per_side(), 4);
    EXPECT_EQ(dict().size(), 50u);
    EXPECT_GE(dict().min_rotational_distance(), 4);
}

TEST(MarkerDictionary, RotationIsAQuarterTurnClockwise) {
    // Only the top-left cell set; after a clockwise turn it is top-right.
    EXPECT_EQ(dict().rotate_cw(0x8000u), 0x1000u);
    std::uint32_t code = dict().codes()[7];
    for (int k = 0; k < 4; ++k) code = dict().rotate_cw(code);
    EXPECT_EQ(code, dict().codes()[7]);
}

TEST(MarkerDictionary, MatchToleratesOneBitError) {
    const std::uint32_t rotated = dict().rotate_cw(dict().codes()[12]);
    const auto m = dict().match(rotated ^ 0x0040u, 1);
    ASSERT_TRUE(m);
    EXPECT_EQ(m->id, 12);
    EXPECT_EQ(m->rotation, 1);
    EXPECT_FALSE(dict().match(rotated ^ 0x0041u ^ 0x8000u, 1));
}

TEST(MarkerDictionary, RejectsLowDistanceDictionary) {
    std::istringstream in("# name bad\n# bits_per_side 4\n0 0x0001\n1 0x0003\n");
    EXPECT_THROW(MarkerDictionary::parse(in), Error);
}

TEST(DetectFiducials, AxisAlignedMarker) {
    std::mt19937_64 rng(1);
    const auto r = wheatai::testing::render_marker(dict().codes()[7], 4, {.side_px = 200}, rng);
    const auto dets = detect_fiducials(r.image, dict());
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_EQ(dets[0].marker_id, 7);
    EXPECT_LT(corner_rmse(dets[0], r), 1.5);
}

TEST(DetectFiducials, QuarterTurnReordersCorners) {
    std::mt19937_64 rng(2);
    const auto upright = wheatai::testing::render_marker(dict().codes()[7], 4, {.side_px = 200}, rng);
    const auto turned = wheatai::testing::render_marker(
        dict().codes()[7], 4, {.side_px = 200, .angle = std::numbers::pi / 2}, rng);
    const auto a = detect_fiducials(upright.image, dict());
    const auto b = detect_fiducials(turned.image, dict());
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0].marker_id, 7);
    EXPECT_LT(corner_rmse(b[0], turned), 1.5);
    // The marker's own top-left corner is now at the top-right on screen.
    EXPECT_GT(b[0].corners[0].x, turned.image.cols / 2.0);
    EXPECT_LT(b[0].corners[0].y, turned.image.rows / 2.0);
    ASSERT_EQ(a.size(), 1u);
    for (int k = 0; k < 4; ++k) {
        EXPECT_NEAR(a[0].side_lengths_px[k], b[0].side_lengths_px[k], 1.5);
    }
}

TEST(DetectFiducials, DecodeIsRotationInvariant) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> jitter(-0.6, 0.6);
    for (int id : {0, 13, 31, 49}) {
        for (int quarter = 0; quarter < 4; ++quarter) {
            const double angle = quarter * std::numbers::pi / 2 + jitter(rng);
            const auto r = wheatai::testing::render_marker(
                dict().codes()[id], 4, {.side_px = 120, .angle = angle, .noise_sigma = 4}, rng);
            const auto dets = detect_fiducials(r.image, dict());
            ASSERT_EQ(dets.size(), 1u) << "id " << id << " angle " << angle;
            EXPECT_EQ(dets[0].marker_id, id);
            EXPECT_LT(corner_rmse(dets[0], r), 1.5);
        }
    }
}

TEST(DetectFiducials, UniformWhiteImageIsEmpty) {
    cv::Mat1b white(256, 256, std::uint8_t{255});
    EXPECT_TRUE(detect_fiducials(white, dict()).empty());
}

TEST(DetectFiducials, TooSmallImageIsEmpty) {
    cv::Mat1b tiny(32, 32, std::uint8_t{0});
    EXPECT_TRUE(detect_fiducials(tiny, dict()).empty());
}

TEST(DetectFiducials, NoisyScaleWithinOnePercent) {
    std::mt19937_64 rng(4);
    for (double side : {80.0, 150.0, 300.0}) {
        const auto r = wheatai::testing::render_marker(
            dict().codes()[21], 4, {.side_px = side, .angle = 0.37, .noise_sigma = 8}, rng);
        const auto dets = detect_fiducials(r.image, dict());
        ASSERT_EQ(dets.size(), 1u);
        const auto c = calibration_from_fiducials(dets, 10.0);
        EXPECT_NEAR(c.px_per_unit, side / 10.0, 0.01 * side / 10.0);
    }
}

TEST(CalibrationFromFiducials, SingleMarker) {
    const std::vector<FiducialDetection> dets{fake_marker(200)};
    const auto c = calibration_from_fiducials(dets, 20.0);
    EXPECT_DOUBLE_EQ(c.px_per_unit, 10.0);
    EXPECT_DOUBLE_EQ(c.dispersion_cv, 0.0);
    EXPECT_EQ(c.unit, Unit::mm);
    EXPECT_EQ(c.method, CalibrationMethod::fiducial);
}

TEST(CalibrationFromFiducials, TwoMarkersUsePopulationDispersion) {
    const std::vector<FiducialDetection> dets{fake_marker(200), fake_marker(202)};
    const auto c = calibration_from_fiducials(dets, 20.0);
    EXPECT_NEAR(c.px_per_unit, 10.05, 1e-12);
    // Eight estimates, four at 10.0 and four at 10.1: sd 0.05.
    EXPECT_NEAR(c.dispersion_cv, 0.05 / 10.05, 1e-12);
}

TEST(CalibrationFromFiducials, Errors) {
    try {
        calibration_from_fiducials({}, 20.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::no_fiducials);
    }
    const std::vector<FiducialDetection> spread{fake_marker(100), fake_marker(200)};
    try {
        calibration_from_fiducials(spread, 20.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::inconsistent_scale);
    }
}

TEST(CalibrationManual, ValidAndInvalid) {
    const auto c = calibration_manual(2.0, Unit::um);
    EXPECT_EQ(c.px_per_unit, 2.0);
    EXPECT_EQ(c.method, CalibrationMethod::manual);
    EXPECT_EQ(c.dispersion_cv, 0.0);
    EXPECT_THROW(calibration_manual(0.0, Unit::mm), Error);
    EXPECT_THROW(calibration_manual(-1.0, Unit::mm), Error);
    EXPECT_THROW(calibration_manual(std::nan(""), Unit::mm), Error);
}

TEST(ConvertMeasurement, LengthAndArea) {
    const auto mm = calibration_manual(10.0, Unit::mm);
    EXPECT_DOUBLE_EQ(convert_measurement(100, MeasureKind::length, mm), 10.0);
    EXPECT_DOUBLE_EQ(convert_measurement(100, MeasureKind::area, mm), 1.0);
    EXPECT_DOUBLE_EQ(convert_measurement(50, MeasureKind::length, calibration_manual(2.0, Unit::um)),
                     25.0);
}

TEST(ConvertMeasurement, RoundTrip) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> v(0, 1e4), f(0.01, 100);
    for (int i = 0; i < 1000; ++i) {
        const auto c = calibration_manual(f(rng), Unit::mm);
        const double x = v(rng);
        for (auto kind : {MeasureKind::length, MeasureKind::area}) {
            const double back = to_pixels(convert_measurement(x, kind, c), kind, c);
            EXPECT_NEAR(back, x, 1e-9 * std::max(1.0, x));
        }
    }
}
