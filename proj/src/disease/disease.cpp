#include "wheatai/disease/disease.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "wheatai/error.hpp"
#include "wheatai/infer/inference.hpp"

namespace wheatai::disease {

namespace {

infer::InferenceParams with_role(infer::InferenceParams p, const std::string& role) {
    p.role = role;
    return p;
}

Rational ratio(std::size_t num, std::size_t den) {
    return Rational(static_cast<unsigned long long>(num)) / static_cast<unsigned long long>(den);
}

std::size_t count(const DetectionSet& ds, const char* category) {
    return ds.count_category(category);
}

}  // namespace

std::optional<Rational> SpikeFHBRecord::severity() const {
    if (total_spikelets == 0) return std::nullopt;
    return ratio(diseased_spikelets, total_spikelets);
}

double to_double(const Rational& r) {
    return r.convert_to<double>();
}

SpikeFHBRecord fhb_single_spike(const std::string& image_ref, const infer::Backend& backend,
                                const infer::InferenceParams& params) {
    const auto p = with_role(params, "fhb_spike_single");
    const DetectionSet ds = infer::postprocess(backend.detect(image_ref, p.role), p);
    SpikeFHBRecord r;
    r.diseased_spikelets = count(ds, "diseased");
    r.total_spikelets = count(ds, "healthy") + r.diseased_spikelets;
    if (r.total_spikelets == 0) {
        throw Error(ErrorCode::no_spikelets,
                    fmt::format("no spikelets detected in image '{}'", image_ref));
    }
    return r;
}

std::optional<FHBSummary> fhb_metrics(std::span<const SpikeFHBRecord> records) {
    if (records.empty()) return std::nullopt;
    FHBSummary s;
    Rational sum_all = 0;
    for (const SpikeFHBRecord& r : records) {
        const auto sev = r.severity();
        if (!sev) {
            throw Error(ErrorCode::no_spikelets,
                        fmt::format("spike {} has no spikelets to assess", r.spike_index));
        }
        sum_all += *sev;
        if (*sev > 0) ++s.n_infected;
    }
    s.n_assessed = records.size();
    s.incidence = ratio(s.n_infected, s.n_assessed);
    s.severity_all = sum_all / static_cast<unsigned long long>(s.n_assessed);
    // Healthy spikes add zero to the sum, so it is also the infected total.
    s.severity_infected = s.n_infected == 0 ? Rational(0)
                                            : sum_all / static_cast<unsigned long long>(s.n_infected);
    s.index = s.incidence * s.severity_infected;
    return s;
}

FHBFieldResult fhb_field_pipeline(const std::string& image_ref, const infer::Backend& backend,
                                  const infer::InferenceParams& params, double crop_padding) {
    if (!std::isfinite(crop_padding) || crop_padding < 0.0) {
        throw Error(ErrorCode::invalid_params,
                    fmt::format("crop_padding must be >= 0, got {}", crop_padding));
    }
    FHBFieldResult out;
    out.spikes = infer::postprocess(backend.detect(image_ref, "spike"), with_role(params, "spike"));
    const auto let_params = with_role(params, "fhb_spikelet");
    std::vector<SpikeFHBRecord> assessable;
    for (const Detection& spike : out.spikes.detections) {
        try {
            const infer::Verdict v = infer::classify(backend, image_ref, "spike_view", spike.index);
            if (!v.keep) continue;
            const CropRect crop =
                geom::padded_crop(spike.box, crop_padding, out.spikes.image_width, out.spikes.image_height);
            DetectionSet local = backend.crop_detections(image_ref, "fhb_spikelet", spike.index);
            local.image_width = crop.width();
            local.image_height = crop.height();
            local = infer::postprocess(local, let_params);
            SpikeFHBRecord r;
            r.spike_index = spike.index;
            r.view = v.view;
            r.diseased_spikelets = count(local, "diseased");
            r.total_spikelets = count(local, "healthy") + r.diseased_spikelets;
            out.crops.emplace(spike.index, crop);
            out.records.push_back(r);
            if (r.total_spikelets == 0) {
                out.warnings.push_back({"spike_without_spikelets",
                                        fmt::format("spike {} has no spikelet detections", spike.index)});
            } else {
                assessable.push_back(r);
            }
        } catch (const Error& e) {
            throw Error(e.code(), fmt::format("spike {}: {}", spike.index, e.what()));
        }
    }
    out.summary = fhb_metrics(assessable);
    if (!out.summary) {
        out.warnings.push_back({"no_assessable_spikes",
                                fmt::format("no assessable spikes in image '{}'", image_ref)});
    }
    return out;
}

FDKResult fdk_assess(const std::string& image_ref, const infer::Backend& backend,
                     const infer::InferenceParams& params, const infer::Backend* seg_backend) {
    const auto p = with_role(params, "kernel");
    FDKResult r;
    r.kernels = infer::postprocess(backend.detect(image_ref, p.role), p);
    r.damaged_kernels = count(r.kernels, "damaged");
    r.total_kernels = count(r.kernels, "healthy") + r.damaged_kernels;
    if (r.total_kernels == 0) {
        throw Error(ErrorCode::no_kernels, fmt::format("no kernels detected in image '{}'", image_ref));
    }
    r.fdk_ratio = ratio(r.damaged_kernels, r.total_kernels);
    if (seg_backend != nullptr) {
        DetectionSet graded{r.kernels.image_ref, r.kernels.image_width, r.kernels.image_height, {}};
        for (const Detection& d : r.kernels.detections) {
            if (d.category == "healthy" || d.category == "damaged") graded.detections.push_back(d);
        }
        const auto prompts = infer::prompts_for(graded);
        const auto masks = infer::segment(seg_backend, image_ref, p.role, graded.image_width,
                                          graded.image_height, prompts, false);
        Rational damaged = 0, all = 0;
        for (std::size_t i = 0; i < masks.size(); ++i) {
            const Rational area(infer::pixel_area(masks[i]));
            all += area;
            if (graded.detections[i].category == "damaged") damaged += area;
        }
        if (all > 0) r.area_weighted_ratio = damaged / all;
    }
    return r;
}

}  // namespace wheatai::disease
