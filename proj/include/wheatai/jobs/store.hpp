#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace wheatai::jobs {

enum class JobState { queued, running, completed, failed, cancelled };

std::string_view state_name(JobState s) noexcept;
/// Throws Error(schema_violation) for an unknown name.
JobState parse_state(std::string_view name);
bool is_terminal(JobState s) noexcept;
/// queued->running, queued->cancelled, running->{completed, failed, cancelled}.
bool legal_transition(JobState from, JobState to) noexcept;

struct JobSpec {
    std::string pipeline_id;
    std::vector<std::string> image_ids;  // submission order
    nlohmann::json params = nlohmann::json::object();
    std::string backend_ref = "default";
};

nlohmann::json to_json(const JobSpec& spec);
/// Structural parse only; semantic checks belong to the scheduler.
/// Throws Error(invalid_params) on wrong field types.
JobSpec spec_from_json(const nlohmann::json& doc);

struct JobFailure {
    std::string code;
    std::string message;
};

struct StateChange {
    JobState state;
    std::string at;
};

struct JobRecord {
    std::string job_id;
    JobSpec spec;
    JobState state = JobState::queued;
    std::size_t done = 0;
    std::size_t total = 0;
    std::string submitted_at;
    std::optional<std::string> started_at;
    std::optional<std::string> finished_at;
    std::optional<JobFailure> error;
    bool cancel_requested = false;
    nlohmann::json result_paths = nullptr;
    std::vector<StateChange> history;
};

/// The HTTP job document: manifest and status fields merged.
nlohmann::json to_json(const JobRecord& r);

/// Moves `r` to `to`, appending to its history. Throws Error(illegal_transition).
void transition(JobRecord& r, JobState to, std::string at);

/// UTC, millisecond resolution, e.g. 2024-05-01T12:00:00.123Z.
std::string utc_timestamp();

/// Writes `bytes` to a sibling temp file, fsyncs it and renames it over `path`,
/// then fsyncs the directory.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// data/jobs/<job_id>/{manifest.json, status.json, results.json, *.csv,
/// overlays/, crops/} plus data/jobs/claims.log.
class JobStore {
public:
    explicit JobStore(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }
    std::filesystem::path job_dir(const std::string& job_id) const;

    /// Persists manifest and status; durable on return.
    void create(const JobRecord& r);
    void save_status(const JobRecord& r);
    /// Throws Error(unknown_job).
    JobRecord load(const std::string& job_id) const;
    bool exists(const std::string& job_id) const;
    /// All jobs, oldest submission first (ties by id).
    std::vector<JobRecord> load_all() const;

    /// Appends "<job_id> <worker>" and fsyncs.
    void append_claim(const std::string& job_id, const std::string& worker);
    std::vector<std::pair<std::string, std::string>> claims() const;

private:
    std::filesystem::path root_;
    std::mutex claim_mutex_;
};

struct StoredImage {
    std::string image_id;  // lowercase hex SHA-256 of the bytes
    std::string filename;
    std::string format;  // "png" or "jpeg"
    std::size_t bytes = 0;
    std::filesystem::path path;
};

nlohmann::json to_json(const StoredImage& img);

/// "png", "jpeg" or nullopt, from the leading magic bytes.
std::optional<std::string> sniff_image_format(std::string_view bytes);

std::string sha256_hex(std::string_view bytes);

/// Content-addressed uploads: data/images/<image_id>/{meta.json, <filename>}.
class ImageStore {
public:
    explicit ImageStore(std::filesystem::path root);

    /// Same bytes always map to the same id; the first filename is kept.
    /// Throws Error(unsupported_format) for anything but PNG or JPEG.
    StoredImage put(std::string_view bytes, const std::string& filename);
    std::optional<StoredImage> find(const std::string& image_id) const;

private:
    std::filesystem::path root_;
    std::mutex mutex_;
};

}  // namespace wheatai::jobs
