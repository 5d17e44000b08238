#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "wheatai/detection.hpp"
#include "wheatai/infer/backend.hpp"
#include "wheatai/infer/types.hpp"
#include "wheatai/warning.hpp"

namespace wheatai::disease {

using Rational = boost::multiprecision::cpp_rational;

inline constexpr double kDefaultCropPadding = 0.1;

struct SpikeFHBRecord {
    std::size_t spike_index = 0;
    std::size_t total_spikelets = 0;
    std::size_t diseased_spikelets = 0;
    std::optional<infer::View> view;

    /// diseased / total; absent when total is 0.
    std::optional<Rational> severity() const;
};

struct FHBSummary {
    std::size_t n_assessed = 0;
    std::size_t n_infected = 0;
    Rational incidence;
    Rational severity_infected;
    Rational severity_all;
    Rational index;
};

using CropRect = geom::PixelRect;

struct FHBFieldResult {
    DetectionSet spikes;                        // post-processed stage 1
    std::map<std::size_t, CropRect> crops;      // kept spikes only
    std::vector<SpikeFHBRecord> records;        // kept spikes, by spike index
    std::optional<FHBSummary> summary;
    Warnings warnings;
};

struct FDKResult {
    std::size_t total_kernels = 0;
    std::size_t damaged_kernels = 0;
    Rational fdk_ratio;
    std::optional<Rational> area_weighted_ratio;
    DetectionSet kernels;
};

/// Throws Error(no_spikelets) when no healthy/diseased spikelet survives
/// postprocessing.
SpikeFHBRecord fhb_single_spike(const std::string& image_ref, const infer::Backend& backend,
                                const infer::InferenceParams& params);

/// Records with total 0 are skipped by the caller; passing one throws
/// Error(no_spikelets). Empty input yields no summary.
std::optional<FHBSummary> fhb_metrics(std::span<const SpikeFHBRecord> records);

/// Spikes (role `spike`) -> verdicts (`spike_view`) -> crop spikelets
/// (`fhb_spikelet`) -> metrics. Spikes without spikelets are kept in
/// `records` with total 0 but left out of the summary.
FHBFieldResult fhb_field_pipeline(const std::string& image_ref, const infer::Backend& backend,
                                  const infer::InferenceParams& params,
                                  double crop_padding = kDefaultCropPadding);

/// Counts healthy/damaged kernels. With a segmenter, also the damaged share
/// of total mask area. Throws Error(no_kernels).
FDKResult fdk_assess(const std::string& image_ref, const infer::Backend& backend,
                     const infer::InferenceParams& params,
                     const infer::Backend* seg_backend = nullptr);

double to_double(const Rational& r);

}  // namespace wheatai::disease
