#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wheatai/export/csv.hpp"
#include "wheatai/infer/backend.hpp"
#include "wheatai/jobs/pipeline.hpp"
#include "wheatai/warning.hpp"

namespace wheatai::jobs {

struct ImageInput {
    std::string image_id;
    std::string filename;  // original name; drives the backend key and plot_id
    std::filesystem::path path;
};

struct ImageError {
    std::string code;
    std::string message;
};

struct ImageOutcome {
    std::string image_id;
    std::string filename;
    std::optional<ImageError> error;  // set when the image failed
    Warnings warnings;
    nlohmann::json result;  // pipeline-specific document, null on failure
    std::vector<exporter::CsvRow> rows;
    std::vector<exporter::CsvRow> summary_rows;

    bool ok() const noexcept { return !error.has_value(); }
};

/// Where per-image artefacts go. Empty paths disable that artefact.
struct ArtifactDirs {
    std::filesystem::path overlays;  // <image_id>.png
    std::filesystem::path crops;     // <image_stem>_det<index>.png
};

/// Backend key for an image: the filename without its extension.
std::string image_stem(const std::string& filename);

/// Runs one image through a pipeline. Pipeline errors are captured in the
/// outcome; only programming errors escape.
ImageOutcome run_pipeline_image(const std::string& pipeline_id, const infer::Backend& backend,
                                const ImageInput& input, const PipelineParams& params,
                                const ArtifactDirs& dirs);

struct BatchOptions {
    int concurrency = 1;
    ArtifactDirs dirs;
    // Called after each image with the number finished so far; serialised.
    std::function<void(std::size_t done)> on_progress;
    // Checked before each image is started.
    const std::atomic<bool>* cancel = nullptr;
};

struct BatchResult {
    std::string pipeline_id;
    nlohmann::json params;
    // Submission order; images skipped by cancellation are absent.
    std::vector<ImageOutcome> images;
    bool cancelled = false;

    std::size_t failed_count() const;
};

BatchResult run_pipeline_batch(const std::string& pipeline_id, const infer::Backend& backend,
                               const std::vector<ImageInput>& inputs, const PipelineParams& params,
                               const BatchOptions& options);

/// Data rows across images in (filename, image_id) order, each image's rows in
/// record order.
std::vector<exporter::CsvRow> collect_rows(const BatchResult& batch, bool summary);

/// Results document: pipeline, params, per-image entries in submission order.
nlohmann::json results_json(const BatchResult& batch);

/// Writes `<pipeline>.csv`, `<pipeline>_summary.csv` when the pipeline has
/// one, and `results.json` into `dir`. Returns the written file names.
std::vector<std::string> write_batch_outputs(const BatchResult& batch, const std::filesystem::path& dir);

}  // namespace wheatai::jobs
