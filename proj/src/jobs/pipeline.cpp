#include "wheatai/jobs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "wheatai/error.hpp"

namespace wheatai::jobs {

using nlohmann::json;

namespace {

ParamSpec number(std::string name, std::optional<double> min, std::optional<double> max, json def,
                 std::string description, bool min_exclusive = false) {
    return {std::move(name), ParamType::number, min, max, min_exclusive, std::move(def), std::move(description)};
}

ParamSpec integer(std::string name, double min, double max, int def, std::string description) {
    return {std::move(name), ParamType::integer, min, max, false, def, std::move(description)};
}

std::vector<ParamSpec> common(std::vector<ParamSpec> extra) {
    std::vector<ParamSpec> out{
        number("conf_thresh", 0.0, 1.0, 0.25, "Minimum detection confidence"),
        number("nms_iou", 0.0, 1.0, 0.30, "Overlap above which same-category boxes are suppressed", true),
    };
    for (auto& p : extra) out.push_back(std::move(p));
    return out;
}

ParamSpec gsd() {
    return number("gsd_mm_per_px", 0.0, std::nullopt, nullptr, "Ground sample distance; enables spikes per m2", true);
}

ParamSpec positive_scale(std::string name, std::string description) {
    return number(std::move(name), 0.0, std::nullopt, nullptr, std::move(description), true);
}

bool in_range(const ParamSpec& s, double v) {
    if (!std::isfinite(v)) return false;
    if (s.min && (s.min_exclusive ? !(v > *s.min) : v < *s.min)) return false;
    if (s.max && v > *s.max) return false;
    return true;
}

std::string range_text(const ParamSpec& s) {
    return fmt::format("{}{}, {}]", s.min_exclusive ? "(" : "[", s.min ? fmt::format("{}", *s.min) : "-inf",
                       s.max ? fmt::format("{}", *s.max) : "inf");
}

}  // namespace

std::string_view param_type_name(ParamType t) noexcept {
    switch (t) {
        case ParamType::number: return "number";
        case ParamType::integer: return "integer";
        case ParamType::boolean: return "boolean";
    }
    return "number";
}

const std::vector<PipelineDescriptor>& pipeline_descriptors() {
    static const std::vector<PipelineDescriptor> all{
        {"spike", "Wheat Spike", common({gsd()})},
        {"spike-uav", "UAV Spike",
         common({gsd(), integer("tile_size", 32, 16384, 1024, "Tile edge in pixels"),
                 integer("overlap", 0, 16383, 128, "Overlap between neighbouring tiles in pixels")})},
        {"spikelet", "Spikelet",
         common({number("tau", 0.0, 1.0, 0.5, "Minimum share of a spikelet's area inside its spike")})},
        {"fhb-single", "FHB Single Spike", common({})},
        {"fhb-field", "FHB Field",
         common({number("crop_padding", 0.0, 1.0, 0.1, "Spike crop padding per side, as a fraction of the box")})},
        {"fdk", "FDK",
         common({{"area_weighted", ParamType::boolean, std::nullopt, std::nullopt, false, false,
                  "Also report the damaged share of kernel mask area"}})},
        {"kernel-morph", "Kernel",
         common({positive_scale("px_per_mm", "Manual scale in pixels per millimetre"),
                 positive_scale("marker_mm", "Printed fiducial side in millimetres; calibrates per image")})},
        {"stomata", "Stomata",
         common({positive_scale("px_per_um", "Scale in pixels per micrometre"),
                 number("open_thresh", 0.0, 1.0, 0.3, "Aperture ratio at or above which a stoma is open")})},
    };
    return all;
}

const PipelineDescriptor* find_pipeline(std::string_view id) {
    for (const auto& d : pipeline_descriptors()) {
        if (d.id == id) return &d;
    }
    return nullptr;
}

json descriptor_json(const PipelineDescriptor& d) {
    json params = json::array();
    for (const ParamSpec& p : d.params) {
        params.push_back({{"name", p.name},
                          {"type", param_type_name(p.type)},
                          {"min", p.min ? json(*p.min) : json(nullptr)},
                          {"max", p.max ? json(*p.max) : json(nullptr)},
                          {"min_exclusive", p.min_exclusive},
                          {"default", p.default_value},
                          {"description", p.description}});
    }
    return {{"pipeline_id", d.id}, {"display_name", d.display_name}, {"params", params}};
}

json PipelineParams::to_json(const PipelineDescriptor& d) const {
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    const json all{{"conf_thresh", conf_thresh},     {"nms_iou", nms_iou},
                   {"gsd_mm_per_px", opt(gsd_mm_per_px)}, {"tile_size", tile_size},
                   {"overlap", overlap},             {"tau", tau},
                   {"crop_padding", crop_padding},   {"area_weighted", area_weighted},
                   {"px_per_mm", opt(px_per_mm)},    {"marker_mm", opt(marker_mm)},
                   {"px_per_um", opt(px_per_um)},    {"open_thresh", open_thresh}};
    json out = json::object();
    for (const ParamSpec& p : d.params) out[p.name] = all.at(p.name);
    return out;
}

PipelineParams PipelineParams::from_json(std::string_view pipeline_id, const json& params) {
    const PipelineDescriptor* d = find_pipeline(pipeline_id);
    if (d == nullptr) {
        throw Error(ErrorCode::unknown_pipeline, fmt::format("unknown pipeline '{}'", pipeline_id));
    }
    if (!params.is_null() && !params.is_object()) {
        throw Error(ErrorCode::invalid_params, "params must be an object");
    }
    PipelineParams out;
    const json given = params.is_null() ? json::object() : params;
    for (const auto& [key, value] : given.items()) {
        const auto spec = std::find_if(d->params.begin(), d->params.end(),
                                       [&](const ParamSpec& s) { return s.name == key; });
        if (spec == d->params.end()) {
            throw Error(ErrorCode::invalid_params,
                        fmt::format("'{}' is not a parameter of pipeline '{}'", key, d->id));
        }
        if (value.is_null()) continue;
        if (spec->type == ParamType::boolean) {
            if (!value.is_boolean()) {
                throw Error(ErrorCode::invalid_params, fmt::format("'{}' must be a boolean", key));
            }
            out.area_weighted = value.get<bool>();
            continue;
        }
        if (!value.is_number() || (spec->type == ParamType::integer && !value.is_number_integer())) {
            throw Error(ErrorCode::invalid_params,
                        fmt::format("'{}' must be {}", key, spec->type == ParamType::integer ? "an integer" : "a number"));
        }
        const double v = value.get<double>();
        if (!in_range(*spec, v)) {
            throw Error(ErrorCode::invalid_params,
                        fmt::format("'{}' = {} outside {}", key, v, range_text(*spec)));
        }
        if (key == "conf_thresh") out.conf_thresh = v;
        else if (key == "nms_iou") out.nms_iou = v;
        else if (key == "gsd_mm_per_px") out.gsd_mm_per_px = v;
        else if (key == "tile_size") out.tile_size = static_cast<int>(v);
        else if (key == "overlap") out.overlap = static_cast<int>(v);
        else if (key == "tau") out.tau = v;
        else if (key == "crop_padding") out.crop_padding = v;
        else if (key == "px_per_mm") out.px_per_mm = v;
        else if (key == "marker_mm") out.marker_mm = v;
        else if (key == "px_per_um") out.px_per_um = v;
        else if (key == "open_thresh") out.open_thresh = v;
    }
    if (d->id == "spike-uav" && out.overlap >= out.tile_size) {
        throw Error(ErrorCode::invalid_params,
                    fmt::format("overlap {} must be smaller than tile_size {}", out.overlap, out.tile_size));
    }
    if (d->id == "kernel-morph") {
        if (out.px_per_mm && out.marker_mm) {
            throw Error(ErrorCode::invalid_params, "give either px_per_mm or marker_mm, not both");
        }
        if (!out.px_per_mm && !out.marker_mm) {
            throw Error(ErrorCode::calibration_required,
                        "kernel-morph needs px_per_mm or marker_mm for calibration");
        }
    }
    if (d->id == "stomata" && !out.px_per_um) {
        throw Error(ErrorCode::calibration_required, "stomata needs px_per_um for calibration");
    }
    return out;
}

}  // namespace wheatai::jobs
