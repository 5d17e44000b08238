#include "wheatai/jobs/runner.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "wheatai/calib/fiducials.hpp"
#include "wheatai/calib/scale.hpp"
#include "wheatai/counting/counting.hpp"
#include "wheatai/disease/disease.hpp"
#include "wheatai/error.hpp"
#include "wheatai/export/overlay.hpp"
#include "wheatai/infer/inference.hpp"
#include "wheatai/morpho/morpho.hpp"

namespace wheatai::jobs {

using exporter::Cell;
using exporter::CsvRow;
using nlohmann::json;

namespace {

struct PipelineOutput {
    json result;
    std::vector<CsvRow> rows;
    std::vector<CsvRow> summary_rows;
    Warnings warnings;
    DetectionSet overlay;
    DetectionSet crops;
    double crop_padding = 0.1;
};

struct Context {
    const infer::Backend& backend;
    const std::string& stem;
    const cv::Mat& image;
    const PipelineParams& params;
    CsvRow prefix;  // image, plot_id
};

Cell opt_cell(const std::optional<double>& v) {
    return v ? Cell{*v} : Cell{};
}

Cell count_cell(std::size_t n) {
    return static_cast<std::int64_t>(n);
}

json opt_json(const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
}

CsvRow row(const Context& ctx, std::initializer_list<Cell> cells) {
    CsvRow r = ctx.prefix;
    r.insert(r.end(), cells.begin(), cells.end());
    return r;
}

json detection_json(const Detection& d) {
    return {{"index", d.index},        {"category", d.category}, {"confidence", d.confidence},
            {"cx", d.box.cx()},        {"cy", d.box.cy()},       {"w", d.box.w()},
            {"h", d.box.h()},          {"angle_rad", d.box.theta()}, {"out_of_frame", d.out_of_frame}};
}

json detections_json(const DetectionSet& ds) {
    json out = json::array();
    for (const Detection& d : ds.detections) out.push_back(detection_json(d));
    return out;
}

json warnings_json(const Warnings& ws) {
    json out = json::array();
    for (const Warning& w : ws) out.push_back({{"code", w.code}, {"message", w.message}});
    return out;
}

DetectionSet concat(const DetectionSet& a, const DetectionSet& b) {
    DetectionSet out = a;
    out.detections.insert(out.detections.end(), b.detections.begin(), b.detections.end());
    return out;
}

PipelineOutput run_spike(const Context& ctx) {
    const auto r = counting::count_spikes(ctx.stem, ctx.backend, ctx.params.inference(), ctx.params.gsd_mm_per_px);
    PipelineOutput out;
    out.result = {{"spike_count", r.spike_count},
                  {"spikes_per_m2", opt_json(r.spikes_per_m2)},
                  {"detections", detections_json(r.detections)}};
    out.rows.push_back(row(ctx, {count_cell(r.spike_count), opt_cell(r.spikes_per_m2)}));
    out.overlay = r.detections;
    out.crops = r.detections;
    return out;
}

PipelineOutput run_spike_uav(const Context& ctx) {
    const auto& p = ctx.params;
    const DetectionSet first = ctx.backend.detect(ctx.stem, counting::tile_role(0, 0));
    const auto grid = counting::plan_tiles(first.image_width, first.image_height, p.tile_size, p.overlap);
    const DetectionSet merged = counting::tile_and_merge(ctx.stem, grid, ctx.backend, p.inference());
    const std::size_t count = merged.count_category("spike");
    const auto density = counting::spikes_per_area(count, p.gsd_mm_per_px, merged.image_width, merged.image_height);
    PipelineOutput out;
    out.result = {{"spike_count", count},
                  {"spikes_per_m2", opt_json(density)},
                  {"tiles", grid.tiles.size()},
                  {"detections", detections_json(merged)}};
    out.rows.push_back(row(ctx, {count_cell(count), opt_cell(density)}));
    out.overlay = merged;
    return out;
}

PipelineOutput run_spikelet(const Context& ctx) {
    auto ip = ctx.params.inference();
    ip.role = "spike";
    const DetectionSet spikes = infer::postprocess(ctx.backend.detect(ctx.stem, "spike"), ip);
    ip.role = "spikelet";
    const DetectionSet lets = infer::postprocess(ctx.backend.detect(ctx.stem, "spikelet"), ip);
    const auto a = counting::associate_spikelets(spikes, lets, ctx.params.tau);
    PipelineOutput out;
    json per_spike = json::array();
    for (const auto& [spike, n] : a.per_spike_counts) {
        per_spike.push_back({{"spike_index", spike}, {"spikelet_count", n}});
        out.rows.push_back(row(ctx, {count_cell(spike), count_cell(n)}));
    }
    out.summary_rows.push_back(row(ctx, {count_cell(a.unassigned.size())}));
    out.result = {{"spikes", per_spike},
                  {"unassigned_spikelets", a.unassigned.size()},
                  {"unassigned", a.unassigned},
                  {"detections", {{"spike", detections_json(spikes)}, {"spikelet", detections_json(lets)}}}};
    out.overlay = concat(spikes, lets);
    out.crops = spikes;
    return out;
}

PipelineOutput run_fhb_single(const Context& ctx) {
    const auto rec = disease::fhb_single_spike(ctx.stem, ctx.backend, ctx.params.inference());
    auto ip = ctx.params.inference();
    ip.role = "fhb_spike_single";
    const DetectionSet dets = infer::postprocess(ctx.backend.detect(ctx.stem, ip.role), ip);
    const double severity = disease::to_double(*rec.severity());
    PipelineOutput out;
    out.result = {{"total_spikelets", rec.total_spikelets},
                  {"diseased_spikelets", rec.diseased_spikelets},
                  {"severity", severity},
                  {"detections", detections_json(dets)}};
    out.rows.push_back(row(ctx, {count_cell(rec.total_spikelets), count_cell(rec.diseased_spikelets), severity}));
    out.overlay = dets;
    return out;
}

PipelineOutput run_fhb_field(const Context& ctx) {
    const auto r = disease::fhb_field_pipeline(ctx.stem, ctx.backend, ctx.params.inference(), ctx.params.crop_padding);
    PipelineOutput out;
    out.warnings = r.warnings;
    json records = json::array();
    DetectionSet kept{r.spikes.image_ref, r.spikes.image_width, r.spikes.image_height, {}};
    for (const auto& rec : r.records) {
        const auto sev = rec.severity();
        const std::optional<double> sev_d = sev ? std::optional<double>(disease::to_double(*sev)) : std::nullopt;
        const Cell view = rec.view ? Cell{std::string(infer::view_name(*rec.view))} : Cell{};
        const auto& crop = r.crops.at(rec.spike_index);
        records.push_back({{"spike_index", rec.spike_index},
                           {"view", rec.view ? json(infer::view_name(*rec.view)) : json(nullptr)},
                           {"total_spikelets", rec.total_spikelets},
                           {"diseased_spikelets", rec.diseased_spikelets},
                           {"severity", opt_json(sev_d)},
                           {"crop", {{"x0", crop.x0}, {"y0", crop.y0}, {"x1", crop.x1}, {"y1", crop.y1}}}});
        out.rows.push_back(row(ctx, {count_cell(rec.spike_index), view, count_cell(rec.total_spikelets),
                                     count_cell(rec.diseased_spikelets), opt_cell(sev_d)}));
        for (const Detection& d : r.spikes.detections) {
            if (d.index == rec.spike_index) kept.detections.push_back(d);
        }
    }
    json summary = nullptr;
    if (r.summary) {
        const auto& s = *r.summary;
        using disease::to_double;
        summary = {{"n_assessed", s.n_assessed},
                   {"n_infected", s.n_infected},
                   {"incidence", to_double(s.incidence)},
                   {"severity_infected", to_double(s.severity_infected)},
                   {"severity_all", to_double(s.severity_all)},
                   {"fhb_index", to_double(s.index)}};
        out.summary_rows.push_back(row(ctx, {count_cell(s.n_assessed), count_cell(s.n_infected), to_double(s.incidence),
                                             to_double(s.severity_infected), to_double(s.severity_all),
                                             to_double(s.index)}));
    } else {
        out.summary_rows.push_back(row(ctx, {Cell{}, Cell{}, Cell{}, Cell{}, Cell{}, Cell{}}));
    }
    out.result = {{"records", records}, {"summary", summary}, {"detections", detections_json(r.spikes)}};
    out.overlay = r.spikes;
    out.crops = kept;
    out.crop_padding = ctx.params.crop_padding;
    return out;
}

PipelineOutput run_fdk(const Context& ctx) {
    const auto r = disease::fdk_assess(ctx.stem, ctx.backend, ctx.params.inference(),
                                       ctx.params.area_weighted ? &ctx.backend : nullptr);
    const double ratio = disease::to_double(r.fdk_ratio);
    const std::optional<double> aw =
        r.area_weighted_ratio ? std::optional<double>(disease::to_double(*r.area_weighted_ratio)) : std::nullopt;
    PipelineOutput out;
    out.result = {{"total_kernels", r.total_kernels},
                  {"damaged_kernels", r.damaged_kernels},
                  {"fdk_ratio", ratio},
                  {"area_weighted_ratio", opt_json(aw)},
                  {"detections", detections_json(r.kernels)}};
    out.rows.push_back(row(ctx, {count_cell(r.total_kernels), count_cell(r.damaged_kernels), ratio, opt_cell(aw)}));
    out.overlay = r.kernels;
    return out;
}

calib::ScaleCalibration kernel_calibration(const Context& ctx) {
    if (ctx.params.px_per_mm) return calib::calibration_manual(*ctx.params.px_per_mm, calib::Unit::mm);
    cv::Mat gray;
    cv::cvtColor(ctx.image, gray, cv::COLOR_BGR2GRAY);
    const auto markers = calib::detect_fiducials(gray, calib::MarkerDictionary::aruco_4x4_50());
    return calib::calibration_from_fiducials(markers, *ctx.params.marker_mm);
}

json stat_json(const morpho::SummaryStat& s) {
    return {{"mean", s.mean}, {"stddev", s.stddev}};
}

PipelineOutput run_kernel_morph(const Context& ctx) {
    const auto c = kernel_calibration(ctx);
    const auto r = morpho::kernel_morphometrics(ctx.stem, ctx.backend, ctx.params.inference(), c);
    PipelineOutput out;
    out.warnings = r.warnings;
    json records = json::array();
    for (const auto& k : r.records) {
        const std::string source(infer::mask_source_name(k.mask_source));
        records.push_back({{"kernel_index", k.kernel_index},
                           {"category", k.category},
                           {"length_mm", k.length_mm},
                           {"width_mm", k.width_mm},
                           {"area_mm2", k.area_mm2},
                           {"mask_source", source}});
        out.rows.push_back(row(ctx, {count_cell(k.kernel_index), k.category, k.length_mm, k.width_mm, k.area_mm2, source}));
    }
    json summary = nullptr;
    if (r.summary) {
        summary = {{"n", r.summary->n},
                   {"length_mm", stat_json(r.summary->length_mm)},
                   {"width_mm", stat_json(r.summary->width_mm)},
                   {"area_mm2", stat_json(r.summary->area_mm2)}};
    }
    out.result = {{"calibration",
                   {{"px_per_unit", c.px_per_unit},
                    {"unit", calib::unit_name(c.unit)},
                    {"method", calib::method_name(c.method)},
                    {"dispersion_cv", c.dispersion_cv}}},
                  {"records", records},
                  {"summary", summary},
                  {"detections", detections_json(r.kernels)}};
    out.overlay = r.kernels;
    return out;
}

PipelineOutput run_stomata(const Context& ctx) {
    const auto c = calib::calibration_manual(*ctx.params.px_per_um, calib::Unit::um);
    const auto r = morpho::stomata_morphometrics(ctx.stem, ctx.backend, ctx.params.inference(), c,
                                                 ctx.params.open_thresh, &ctx.backend);
    PipelineOutput out;
    out.warnings = r.warnings;
    json records = json::array();
    for (const auto& s : r.records) {
        const Cell flag = s.open_flag ? Cell{*s.open_flag} : Cell{};
        records.push_back({{"stoma_index", s.stoma_index},
                           {"stoma_area_um2", s.stoma_area_um2},
                           {"pore_index", s.pore_index ? json(*s.pore_index) : json(nullptr)},
                           {"pore_length_um", opt_json(s.pore_length_um)},
                           {"pore_width_um", opt_json(s.pore_width_um)},
                           {"pore_area_um2", opt_json(s.pore_area_um2)},
                           {"aperture_ratio", opt_json(s.aperture_ratio)},
                           {"open_flag", s.open_flag ? json(*s.open_flag) : json(nullptr)},
                           {"mask_source", infer::mask_source_name(s.mask_source)}});
        out.rows.push_back(row(ctx, {count_cell(s.stoma_index), s.stoma_area_um2, opt_cell(s.pore_length_um),
                                     opt_cell(s.pore_width_um), opt_cell(s.pore_area_um2), opt_cell(s.aperture_ratio),
                                     flag}));
    }
    const double fov = morpho::Rational(r.summary.fov_area_mm2).convert_to<double>();
    const double density = morpho::Rational(r.summary.density_per_mm2).convert_to<double>();
    out.summary_rows.push_back(row(ctx, {count_cell(r.summary.stomata_count), fov, density,
                                         opt_cell(r.summary.mean_aperture_ratio)}));
    out.result = {{"records", records},
                  {"summary",
                   {{"stomata_count", r.summary.stomata_count},
                    {"fov_area_mm2", fov},
                    {"density_per_mm2", density},
                    {"mean_aperture_ratio", opt_json(r.summary.mean_aperture_ratio)}}},
                  {"detections", {{"stoma", detections_json(r.stomata)}, {"pore", detections_json(r.pores)}}}};
    out.overlay = concat(r.stomata, r.pores);
    return out;
}

PipelineOutput dispatch(const std::string& id, const Context& ctx) {
    if (id == "spike") return run_spike(ctx);
    if (id == "spike-uav") return run_spike_uav(ctx);
    if (id == "spikelet") return run_spikelet(ctx);
    if (id == "fhb-single") return run_fhb_single(ctx);
    if (id == "fhb-field") return run_fhb_field(ctx);
    if (id == "fdk") return run_fdk(ctx);
    if (id == "kernel-morph") return run_kernel_morph(ctx);
    if (id == "stomata") return run_stomata(ctx);
    throw Error(ErrorCode::unknown_pipeline, fmt::format("unknown pipeline '{}'", id));
}

}  // namespace

std::string image_stem(const std::string& filename) {
    return std::filesystem::path(filename).stem().string();
}

ImageOutcome run_pipeline_image(const std::string& pipeline_id, const infer::Backend& backend,
                                const ImageInput& input, const PipelineParams& params,
                                const ArtifactDirs& dirs) {
    ImageOutcome outcome{input.image_id, input.filename, std::nullopt, {}, nullptr, {}, {}};
    const std::string stem = image_stem(input.filename);
    try {
        const cv::Mat image = cv::imread(input.path.string(), cv::IMREAD_COLOR);
        if (image.empty()) {
            throw Error(ErrorCode::io_error, fmt::format("cannot decode image '{}'", input.filename));
        }
        const Context ctx{backend, stem, image, params,
                          {std::string(input.filename), exporter::plot_id(input.filename)}};
        PipelineOutput out = dispatch(pipeline_id, ctx);
        if (!dirs.overlays.empty()) {
            std::filesystem::create_directories(dirs.overlays);
            exporter::write_png(dirs.overlays / (input.image_id + ".png"),
                                exporter::render_overlay(image, out.overlay));
        }
        if (!dirs.crops.empty() && !out.crops.empty()) {
            exporter::export_crops(image, out.crops, stem, dirs.crops, out.crop_padding);
        }
        outcome.result = std::move(out.result);
        outcome.rows = std::move(out.rows);
        outcome.summary_rows = std::move(out.summary_rows);
        outcome.warnings = std::move(out.warnings);
    } catch (const Error& e) {
        outcome.error = ImageError{std::string(e.code_name()), e.what()};
    } catch (const cv::Exception& e) {
        outcome.error = ImageError{"image_error", e.what()};
    }
    if (outcome.error) {
        outcome.result = nullptr;
        outcome.rows.clear();
        outcome.summary_rows.clear();
        outcome.warnings.push_back({outcome.error->code, outcome.error->message});
    }
    return outcome;
}

std::size_t BatchResult::failed_count() const {
    return static_cast<std::size_t>(
        std::count_if(images.begin(), images.end(), [](const ImageOutcome& o) { return !o.ok(); }));
}

BatchResult run_pipeline_batch(const std::string& pipeline_id, const infer::Backend& backend,
                               const std::vector<ImageInput>& inputs, const PipelineParams& params,
                               const BatchOptions& options) {
    const PipelineDescriptor* d = find_pipeline(pipeline_id);
    if (d == nullptr) throw Error(ErrorCode::unknown_pipeline, fmt::format("unknown pipeline '{}'", pipeline_id));
    BatchResult batch{pipeline_id, params.to_json(*d), {}, false};

    std::vector<std::optional<ImageOutcome>> slots(inputs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stopped{false};
    std::mutex progress_mutex;
    std::size_t done = 0;
    const auto worker = [&] {
        for (;;) {
            if (options.cancel && options.cancel->load()) {
                stopped = true;
                return;
            }
            const std::size_t i = next.fetch_add(1);
            if (i >= inputs.size()) return;
            slots[i] = run_pipeline_image(pipeline_id, backend, inputs[i], params, options.dirs);
            std::lock_guard lock(progress_mutex);
            ++done;
            if (options.on_progress) options.on_progress(done);
        }
    };
    const int threads = std::clamp<int>(options.concurrency, 1, static_cast<int>(std::max<std::size_t>(inputs.size(), 1)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& slot : slots) {
        if (slot) batch.images.push_back(std::move(*slot));
    }
    batch.cancelled = stopped && batch.images.size() < inputs.size();
    return batch;
}

std::vector<CsvRow> collect_rows(const BatchResult& batch, bool summary) {
    std::vector<const ImageOutcome*> order;
    for (const auto& o : batch.images) order.push_back(&o);
    std::stable_sort(order.begin(), order.end(), [](const ImageOutcome* a, const ImageOutcome* b) {
        return std::tie(a->filename, a->image_id) < std::tie(b->filename, b->image_id);
    });
    std::vector<CsvRow> rows;
    for (const ImageOutcome* o : order) {
        const auto& src = summary ? o->summary_rows : o->rows;
        rows.insert(rows.end(), src.begin(), src.end());
    }
    return rows;
}

json results_json(const BatchResult& batch) {
    json images = json::array();
    for (const ImageOutcome& o : batch.images) {
        images.push_back({{"image_id", o.image_id},
                          {"image", o.filename},
                          {"plot_id", exporter::plot_id(o.filename)},
                          {"status", o.ok() ? "ok" : "failed"},
                          {"error", o.error ? json{{"code", o.error->code}, {"message", o.error->message}} : json(nullptr)},
                          {"warnings", warnings_json(o.warnings)},
                          {"result", o.result}});
    }
    const std::size_t failed = batch.failed_count();
    return {{"pipeline_id", batch.pipeline_id},
            {"params", batch.params},
            {"images", images},
            {"summary",
             {{"images_total", batch.images.size()},
              {"images_ok", batch.images.size() - failed},
              {"images_failed", failed},
              {"cancelled", batch.cancelled}}}};
}

std::vector<std::string> write_batch_outputs(const BatchResult& batch, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    const auto& main = exporter::csv_schemas().at(batch.pipeline_id);
    exporter::write_csv(dir / (main.name + ".csv"), main, collect_rows(batch, false));
    written.push_back(main.name + ".csv");
    const auto& summaries = exporter::csv_summary_schemas();
    if (const auto it = summaries.find(batch.pipeline_id); it != summaries.end()) {
        exporter::write_csv(dir / (it->second.name + ".csv"), it->second, collect_rows(batch, true));
        written.push_back(it->second.name + ".csv");
    }
    const std::string text = results_json(batch).dump(2) + "\n";
    std::ofstream out(dir / "results.json", std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::io_error, fmt::format("cannot write results in '{}'", dir.string()));
    written.push_back("results.json");
    return written;
}

}  // namespace wheatai::jobs
