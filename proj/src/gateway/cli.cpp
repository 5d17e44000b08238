#include "wheatai/gateway/cli.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "wheatai/error.hpp"
#include "wheatai/gateway/http.hpp"
#include "wheatai/infer/backend.hpp"
#include "wheatai/jobs/pipeline.hpp"
#include "wheatai/jobs/runner.hpp"
#include "wheatai/jobs/scheduler.hpp"

namespace wheatai::gateway {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunArgs {
    std::string pipeline;
    fs::path input, backend, out;
    std::optional<double> conf, nms_iou, px_per_mm, marker_mm, gsd, px_per_um, open_thresh, tau, crop_padding;
    std::optional<int> tile, overlap;
    bool area_weighted = false;
    int workers = 1;
    bool no_artifacts = false;
};

struct ServeArgs {
    std::string host = "127.0.0.1";
    int port = 8080;
    fs::path data_dir = "data";
    int workers = 2;
    int per_job = 1;
    fs::path static_dir;
    double max_upload_mb = 64;
    std::string cors_origin;
};

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) {
    g_stop = true;
}

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

json run_params(const RunArgs& a) {
    json p = json::object();
    const auto set = [&](const char* key, const auto& v) {
        if (v) p[key] = *v;
    };
    set("conf_thresh", a.conf);
    set("nms_iou", a.nms_iou);
    set("px_per_mm", a.px_per_mm);
    set("marker_mm", a.marker_mm);
    set("gsd_mm_per_px", a.gsd);
    set("tile_size", a.tile);
    set("overlap", a.overlap);
    set("px_per_um", a.px_per_um);
    set("open_thresh", a.open_thresh);
    set("tau", a.tau);
    set("crop_padding", a.crop_padding);
    if (a.area_weighted) p["area_weighted"] = true;
    return p;
}

int usage_error(const Error& e) {
    fmt::print(stderr, "error: {}: {}\n", e.code_name(), e.what());
    return kExitUsage;
}

int fatal(const std::string& code, const std::string& message) {
    fmt::print(stderr, "error: {}: {}\n", code, message);
    return kExitFatal;
}

int do_run(const RunArgs& a) {
    jobs::PipelineParams params;
    try {
        params = jobs::PipelineParams::from_json(a.pipeline, run_params(a));
    } catch (const Error& e) {
        return usage_error(e);
    }
    if (!fs::is_directory(a.input)) return fatal("not_a_directory", fmt::format("input '{}' is not a directory", a.input.string()));

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(a.input)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(), [](const fs::path& x, const fs::path& y) {
        return x.filename().string() < y.filename().string();
    });
    if (files.empty()) return fatal("no_images", fmt::format("no PNG or JPEG files in '{}'", a.input.string()));
    std::vector<jobs::ImageInput> inputs;
    std::set<std::string> stems;
    for (const auto& f : files) {
        const std::string name = f.filename().string();
        const std::string stem = jobs::image_stem(name);
        if (!stems.insert(stem).second) {
            return fatal("invalid_params", fmt::format("two input images share the stem '{}'", stem));
        }
        inputs.push_back({stem, name, f});
    }

    try {
        const auto backend = infer::open_fixture_backend(a.backend);
        jobs::BatchOptions opts;
        opts.concurrency = a.workers;
        if (!a.no_artifacts) opts.dirs = {a.out / "overlays", a.out / "crops"};
        const auto batch = jobs::run_pipeline_batch(a.pipeline, *backend, inputs, params, opts);
        const auto written = jobs::write_batch_outputs(batch, a.out);
        for (const auto& img : batch.images) {
            for (const auto& w : img.warnings) {
                fmt::print(stderr, "warning: {}: {}: {}\n", img.filename, w.code, w.message);
            }
        }
        const std::size_t failed = batch.failed_count();
        fmt::print(stderr, "{}: {} images, {} failed; wrote {}\n", a.pipeline, batch.images.size(), failed,
                   fmt::join(written, ", "));
        if (failed == batch.images.size()) {
            return fatal("all_images_failed", fmt::format("all {} images failed", failed));
        }
        return kExitOk;
    } catch (const Error& e) {
        return fatal(std::string(e.code_name()), e.what());
    } catch (const std::exception& e) {
        return fatal("internal_error", e.what());
    }
}

int do_serve(const ServeArgs& a) {
    jobs::SchedulerOptions sopts;
    sopts.workers = a.workers;
    sopts.per_job_concurrency = a.per_job;
    try {
        jobs::JobScheduler scheduler(a.data_dir, sopts);
        GatewayOptions gopts;
        gopts.static_dir = a.static_dir;
        gopts.max_upload_bytes = static_cast<std::size_t>(a.max_upload_mb * 1024 * 1024);
        gopts.cors_origin = a.cors_origin;
        ApiServer server(scheduler, gopts);
        const int port = server.bind(a.host, a.port);
        scheduler.start();

        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        std::atomic<bool> done{false};
        std::thread watcher([&] {
            while (!g_stop && !done) std::this_thread::sleep_for(std::chrono::milliseconds(50));
            server.stop();
        });
        fmt::print(stderr, "listening on http://{}:{} (data {}, {} workers)\n", a.host, port, a.data_dir.string(),
                   a.workers);
        const bool ok = server.listen();
        done = true;
        watcher.join();
        fmt::print(stderr, "shutting down; waiting for running jobs\n");
        scheduler.shutdown();
        return ok || g_stop ? kExitOk : kExitFatal;
    } catch (const Error& e) {
        return fatal(std::string(e.code_name()), e.what());
    } catch (const std::exception& e) {
        return fatal("internal_error", e.what());
    }
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Wheat phenotyping pipelines over oriented-box predictions"};
    app.require_subcommand(1);

    RunArgs r;
    auto* run = app.add_subcommand("run", "Process every image in a directory");
    run->add_option("--pipeline", r.pipeline, "Pipeline id")->required();
    run->add_option("--input", r.input, "Directory of PNG/JPEG images")->required();
    run->add_option("--backend", r.backend, "Directory of <stem>.pred.json fixtures")->required();
    run->add_option("--out", r.out, "Output directory")->required();
    run->add_option("--conf", r.conf, "Confidence threshold");
    run->add_option("--nms-iou", r.nms_iou, "NMS IoU threshold");
    auto* ppm = run->add_option("--px-per-mm", r.px_per_mm, "Manual scale, pixels per mm");
    run->add_option("--marker-mm", r.marker_mm, "Fiducial side in mm; calibrates each image")->excludes(ppm);
    run->add_option("--gsd", r.gsd, "Ground sample distance, mm per pixel");
    run->add_option("--tile", r.tile, "Tile edge in pixels");
    run->add_option("--overlap", r.overlap, "Tile overlap in pixels");
    run->add_option("--px-per-um", r.px_per_um, "Stomata scale, pixels per micrometre");
    run->add_option("--open-thresh", r.open_thresh, "Aperture ratio above which a stoma is open");
    run->add_option("--tau", r.tau, "Spikelet assignment threshold");
    run->add_option("--crop-padding", r.crop_padding, "Spike crop padding fraction");
    run->add_flag("--area-weighted", r.area_weighted, "Report the area-weighted FDK ratio");
    run->add_option("--workers", r.workers, "Images processed concurrently")->check(CLI::Range(1, 256));
    run->add_flag("--no-artifacts", r.no_artifacts, "Skip overlays and crops");

    ServeArgs s;
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    serve->add_option("--host", s.host, "Bind address");
    serve->add_option("--port", s.port, "TCP port")->envname("WHEATAI_PORT")->check(CLI::Range(0, 65535));
    serve->add_option("--data-dir", s.data_dir, "Data directory")->envname("WHEATAI_DATA_DIR");
    serve->add_option("--workers", s.workers, "Concurrent jobs")->envname("WHEATAI_WORKERS")->check(CLI::Range(1, 256));
    serve->add_option("--per-job-concurrency", s.per_job, "Images processed concurrently within a job")
        ->check(CLI::Range(1, 256));
    serve->add_option("--static-dir", s.static_dir, "Built web UI to serve at /")->check(CLI::ExistingDirectory);
    serve->add_option("--max-upload-mb", s.max_upload_mb, "Upload size limit")->check(CLI::PositiveNumber);
    serve->add_option("--cors-origin", s.cors_origin, "Allowed cross-origin caller");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    if (run->parsed()) return do_run(r);
    return do_serve(s);
}

}  // namespace wheatai::gateway
