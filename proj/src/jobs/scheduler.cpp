#include "wheatai/jobs/scheduler.hpp"

#include <random>
#include <set>

#include <fmt/format.h>

#include "wheatai/error.hpp"
#include "wheatai/infer/backend.hpp"
#include "wheatai/jobs/pipeline.hpp"
#include "wheatai/jobs/runner.hpp"

namespace wheatai::jobs {

namespace fs = std::filesystem;
using nlohmann::json;

JobScheduler::JobScheduler(fs::path data_dir, SchedulerOptions options)
    : data_dir_(std::move(data_dir)),
      options_(std::move(options)),
      jobs_(data_dir_ / "jobs"),
      images_(data_dir_ / "images") {
    if (options_.backends_root.empty()) options_.backends_root = data_dir_ / "backends";
    options_.workers = std::max(options_.workers, 1);
    options_.per_job_concurrency = std::max(options_.per_job_concurrency, 1);
}

JobScheduler::~JobScheduler() {
    shutdown();
}

void JobScheduler::start() {
    std::lock_guard qlock(queue_mutex_);
    if (started_) return;
    started_ = true;
    stopping_ = false;
    for (JobRecord& r : jobs_.load_all()) {
        {
            std::lock_guard slock(slots_mutex_);
            if (slots_.count(r.job_id)) continue;
        }
        if (r.state == JobState::running) {
            const std::string now = utc_timestamp();
            transition(r, JobState::failed, now);
            r.finished_at = now;
            r.error = JobFailure{"interrupted", "the service stopped while this job was running"};
            jobs_.save_status(r);
        } else if (r.state == JobState::queued) {
            auto s = std::make_shared<Slot>();
            s->record = r;
            {
                std::lock_guard slock(slots_mutex_);
                slots_.emplace(r.job_id, s);
            }
            queue_.push_back(r.job_id);
        }
    }
    for (int w = 0; w < options_.workers; ++w) {
        workers_.emplace_back([this, w] { worker_loop(w); });
    }
    queue_cv_.notify_all();
}

void JobScheduler::shutdown() {
    {
        std::lock_guard lock(queue_mutex_);
        stopping_ = true;
    }
    queue_cv_.notify_all();
    for (auto& t : workers_) t.join();
    workers_.clear();
    std::lock_guard lock(queue_mutex_);
    started_ = false;
}

fs::path JobScheduler::resolve_backend(const std::string& ref) const {
    const fs::path p(ref);
    if (p.is_absolute()) return p;
    for (const auto& part : p) {
        if (part == "..") throw Error(ErrorCode::unknown_backend, fmt::format("backend '{}' escapes the backend root", ref));
    }
    return options_.backends_root / p;
}

std::string JobScheduler::new_job_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}() ^
                                            static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count())};
    for (;;) {
        std::string id = fmt::format("j{:016x}", rng());
        std::lock_guard lock(slots_mutex_);
        if (!slots_.count(id) && !jobs_.exists(id)) return id;
    }
}

JobRecord JobScheduler::validate_and_create(const JobSpec& spec) {
    if (find_pipeline(spec.pipeline_id) == nullptr) {
        throw Error(ErrorCode::unknown_pipeline, fmt::format("unknown pipeline '{}'", spec.pipeline_id));
    }
    if (spec.image_ids.empty()) throw Error(ErrorCode::invalid_params, "a job needs at least one image");
    std::set<std::string> seen;
    for (const auto& id : spec.image_ids) {
        if (!seen.insert(id).second) throw Error(ErrorCode::invalid_params, fmt::format("image '{}' listed twice", id));
    }
    PipelineParams::from_json(spec.pipeline_id, spec.params);
    for (const auto& id : spec.image_ids) {
        if (!images_.find(id)) throw Error(ErrorCode::unknown_image, fmt::format("unknown image '{}'", id));
    }
    if (!fs::is_directory(resolve_backend(spec.backend_ref))) {
        throw Error(ErrorCode::unknown_backend, fmt::format("backend '{}' not found", spec.backend_ref));
    }

    JobRecord r;
    r.job_id = new_job_id();
    r.spec = spec;
    r.total = spec.image_ids.size();
    r.submitted_at = utc_timestamp();
    r.history.push_back({JobState::queued, r.submitted_at});
    jobs_.create(r);
    auto s = std::make_shared<Slot>();
    s->record = r;
    std::lock_guard lock(slots_mutex_);
    slots_.emplace(r.job_id, std::move(s));
    return r;
}

std::string JobScheduler::submit(const JobSpec& spec) {
    const JobRecord r = validate_and_create(spec);
    {
        std::lock_guard lock(queue_mutex_);
        queue_.push_back(r.job_id);
    }
    queue_cv_.notify_one();
    return r.job_id;
}

JobRecord JobScheduler::run_sync(const JobSpec& spec) {
    const JobRecord r = validate_and_create(spec);
    execute(r.job_id, "sync");
    return status(r.job_id);
}

std::shared_ptr<JobScheduler::Slot> JobScheduler::slot(const std::string& job_id) const {
    std::lock_guard lock(slots_mutex_);
    const auto it = slots_.find(job_id);
    return it == slots_.end() ? nullptr : it->second;
}

JobRecord JobScheduler::status(const std::string& job_id) const {
    if (const auto s = slot(job_id)) {
        std::lock_guard lock(s->mutex);
        return s->record;
    }
    return jobs_.load(job_id);
}

JobRecord JobScheduler::cancel(const std::string& job_id) {
    const auto s = slot(job_id);
    if (!s) return jobs_.load(job_id);  // terminal from an earlier run: no-op
    std::lock_guard lock(s->mutex);
    JobRecord& r = s->record;
    if (r.state == JobState::queued) {
        const std::string now = utc_timestamp();
        transition(r, JobState::cancelled, now);
        r.cancel_requested = true;
        r.finished_at = now;
        jobs_.save_status(r);
    } else if (r.state == JobState::running && !r.cancel_requested) {
        r.cancel_requested = true;
        s->cancel = true;
        jobs_.save_status(r);
    }
    return r;
}

JobRecord JobScheduler::wait(const std::string& job_id, std::chrono::milliseconds timeout) const {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        JobRecord r = status(job_id);
        if (is_terminal(r.state) || std::chrono::steady_clock::now() >= deadline) return r;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
}

void JobScheduler::worker_loop(int worker) {
    const std::string name = fmt::format("w{}", worker);
    for (;;) {
        std::string id;
        {
            std::unique_lock lock(queue_mutex_);
            queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (stopping_) return;
            id = std::move(queue_.front());
            queue_.pop_front();
        }
        execute(id, name);
    }
}

void JobScheduler::finish(Slot& s, JobState to, std::optional<JobFailure> error, json result_paths) {
    std::lock_guard lock(s.mutex);
    JobRecord& r = s.record;
    r.result_paths = std::move(result_paths);
    r.error = std::move(error);
    const std::string now = utc_timestamp();
    r.finished_at = now;
    transition(r, to, now);
    jobs_.save_status(r);
}

void JobScheduler::execute(const std::string& job_id, const std::string& worker) {
    const auto s = slot(job_id);
    if (!s) return;
    JobSpec spec;
    {
        std::lock_guard lock(s->mutex);
        JobRecord& r = s->record;
        if (r.state != JobState::queued) return;  // cancelled while waiting
        jobs_.append_claim(job_id, worker);
        const std::string now = utc_timestamp();
        transition(r, JobState::running, now);
        r.started_at = now;
        jobs_.save_status(r);
        spec = r.spec;
    }

    const fs::path dir = jobs_.job_dir(job_id);
    try {
        const PipelineParams params = PipelineParams::from_json(spec.pipeline_id, spec.params);
        const auto backend = infer::open_fixture_backend(resolve_backend(spec.backend_ref));
        std::vector<ImageInput> inputs;
        for (const auto& id : spec.image_ids) {
            const auto img = images_.find(id);
            if (!img) throw Error(ErrorCode::unknown_image, fmt::format("image '{}' vanished from the store", id));
            inputs.push_back({img->image_id, img->filename, img->path});
        }
        BatchOptions opts;
        opts.concurrency = options_.per_job_concurrency;
        opts.dirs = {dir / "overlays", dir / "crops"};
        opts.cancel = &s->cancel;
        opts.on_progress = [&](std::size_t done) {
            {
                std::lock_guard lock(s->mutex);
                s->record.done = done;
                jobs_.save_status(s->record);
            }
            if (options_.on_progress) options_.on_progress(job_id, done);
        };
        const BatchResult batch = run_pipeline_batch(spec.pipeline_id, *backend, inputs, params, opts);
        const auto files = write_batch_outputs(batch, dir);
        json paths = {{"results", "results.json"}, {"csv", json::array()}, {"overlays", "overlays/"}, {"crops", "crops/"}};
        for (const auto& f : files) {
            if (f != "results.json") paths["csv"].push_back(f);
        }
        if (batch.cancelled) {
            finish(*s, JobState::cancelled, std::nullopt, paths);
        } else if (!batch.images.empty() && batch.failed_count() == batch.images.size()) {
            finish(*s, JobState::failed,
                   JobFailure{"all_images_failed", fmt::format("all {} images failed", batch.images.size())}, paths);
        } else {
            finish(*s, JobState::completed, std::nullopt, paths);
        }
    } catch (const Error& e) {
        finish(*s, JobState::failed, JobFailure{std::string(e.code_name()), e.what()}, nullptr);
    } catch (const std::exception& e) {
        finish(*s, JobState::failed, JobFailure{"internal_error", e.what()}, nullptr);
    }
}

}  // namespace wheatai::jobs
