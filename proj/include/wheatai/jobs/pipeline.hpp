#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wheatai/infer/types.hpp"

namespace wheatai::jobs {

enum class ParamType { number, integer, boolean };
std::string_view param_type_name(ParamType t) noexcept;

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::number;
    std::optional<double> min;
    std::optional<double> max;
    bool min_exclusive = false;
    nlohmann::json default_value;  // null when the parameter has no default
    std::string description;
};

struct PipelineDescriptor {
    std::string id;
    std::string display_name;
    std::vector<ParamSpec> params;
};

/// The eight pipelines, in dropdown order.
const std::vector<PipelineDescriptor>& pipeline_descriptors();
/// Null for unknown ids.
const PipelineDescriptor* find_pipeline(std::string_view id);
nlohmann::json descriptor_json(const PipelineDescriptor& d);

struct PipelineParams {
    double conf_thresh = 0.25;
    double nms_iou = 0.30;
    std::optional<double> gsd_mm_per_px;
    int tile_size = 1024;
    int overlap = 128;
    double tau = 0.5;
    double crop_padding = 0.1;
    bool area_weighted = false;
    std::optional<double> px_per_mm;
    std::optional<double> marker_mm;
    std::optional<double> px_per_um;
    double open_thresh = 0.3;

    infer::InferenceParams inference() const { return {conf_thresh, nms_iou, {}}; }

    /// Only the parameters the pipeline declares, defaults filled in.
    nlohmann::json to_json(const PipelineDescriptor& d) const;

    /// Throws Error(unknown_pipeline), Error(invalid_params) for unknown keys,
    /// wrong types or out-of-range values, and Error(calibration_required)
    /// when a calibrated pipeline lacks a scale.
    static PipelineParams from_json(std::string_view pipeline_id, const nlohmann::json& params);
};

}  // namespace wheatai::jobs
