#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "wheatai/jobs/store.hpp"

namespace wheatai::jobs {

struct SchedulerOptions {
    int workers = 1;
    int per_job_concurrency = 1;
    // Relative backend_ref values resolve here; defaults to <data>/backends.
    std::filesystem::path backends_root;
    // Observer called after each finished image, outside any job lock.
    std::function<void(const std::string& job_id, std::size_t done)> on_progress;
};

/// File-backed job queue. Owns data/jobs and data/images under `data_dir`;
/// one process per data directory.
class JobScheduler {
public:
    explicit JobScheduler(std::filesystem::path data_dir, SchedulerOptions options = {});
    ~JobScheduler();

    JobScheduler(const JobScheduler&) = delete;
    JobScheduler& operator=(const JobScheduler&) = delete;

    /// Fails jobs a previous process left running (code `interrupted`),
    /// queues the persisted queued jobs in submission order and starts the
    /// workers.
    void start();
    /// Stops claiming new jobs and waits for running ones to finish. Queued
    /// jobs stay queued on disk.
    void shutdown();

    /// Validates and persists a queued job. Throws Error with unknown_pipeline,
    /// invalid_params, calibration_required, unknown_image or unknown_backend.
    std::string submit(const JobSpec& spec);
    /// Same validation and execution path as a queued job, run on the caller's
    /// thread. Returns the terminal record.
    JobRecord run_sync(const JobSpec& spec);

    /// Throws Error(unknown_job).
    JobRecord status(const std::string& job_id) const;
    JobRecord cancel(const std::string& job_id);
    /// Polls until the job is terminal or the timeout passes.
    JobRecord wait(const std::string& job_id, std::chrono::milliseconds timeout) const;

    JobStore& jobs() noexcept { return jobs_; }
    ImageStore& images() noexcept { return images_; }
    std::filesystem::path resolve_backend(const std::string& ref) const;

private:
    struct Slot {
        mutable std::mutex mutex;
        JobRecord record;
        std::atomic<bool> cancel{false};
    };

    JobRecord validate_and_create(const JobSpec& spec);
    std::shared_ptr<Slot> slot(const std::string& job_id) const;
    void worker_loop(int worker);
    void execute(const std::string& job_id, const std::string& worker);
    void finish(Slot& s, JobState to, std::optional<JobFailure> error, nlohmann::json result_paths);
    std::string new_job_id();

    std::filesystem::path data_dir_;
    SchedulerOptions options_;
    JobStore jobs_;
    ImageStore images_;

    mutable std::mutex slots_mutex_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;

    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::deque<std::string> queue_;
    bool stopping_ = false;
    bool started_ = false;
    std::vector<std::thread> workers_;
};

}  // namespace wheatai::jobs
