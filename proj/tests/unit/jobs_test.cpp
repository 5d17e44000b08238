#include <gtest/gtest.h>

#include <random>
#include <set>
#include <thread>

#include "../support/fixture_data.hpp"
#include "wheatai/error.hpp"
#include "wheatai/jobs/pipeline.hpp"
#include "wheatai/jobs/runner.hpp"
#include "wheatai/jobs/scheduler.hpp"

using namespace wheatai;
using namespace wheatai::jobs;
using namespace std::chrono_literals;
using nlohmann::json;
using wheatai::testing::TempDir;
using wheatai::testing::slurp;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::io_error;
}

JobSpec fixture_spec(JobScheduler& s, const std::string& pipeline) {
    JobSpec spec;
    spec.pipeline_id = pipeline;
    spec.image_ids = wheatai::testing::upload_fixture_images(s.images(), pipeline);
    spec.params = wheatai::testing::fixture_params(pipeline);
    spec.backend_ref = (wheatai::testing::fixture_root() / pipeline / "preds").string();
    return spec;
}

// Replays a persisted history against the transition table.
void expect_legal_history(const JobRecord& r) {
    ASSERT_FALSE(r.history.empty());
    EXPECT_EQ(r.history.front().state, JobState::queued);
    for (std::size_t i = 1; i < r.history.size(); ++i) {
        EXPECT_TRUE(legal_transition(r.history[i - 1].state, r.history[i].state))
            << state_name(r.history[i - 1].state) << " -> " << state_name(r.history[i].state);
    }
    EXPECT_EQ(r.history.back().state, r.state);
}

std::size_t claims_for(const JobStore& store, const std::string& id) {
    const auto all = store.claims();
    return static_cast<std::size_t>(std::count_if(all.begin(), all.end(), [&](const auto& c) { return c.first == id; }));
}

}  // namespace

TEST(PipelineDescriptors, EightPipelinesWithDefaultsInRange) {
    const auto& all = pipeline_descriptors();
    ASSERT_EQ(all.size(), 8u);
    std::set<std::string> ids;
    for (const auto& d : all) {
        ids.insert(d.id);
        EXPECT_EQ(d.params.at(0).name, "conf_thresh");
        EXPECT_EQ(d.params.at(1).name, "nms_iou");
        for (const auto& p : d.params) {
            if (!p.default_value.is_number()) continue;
            const double v = p.default_value.get<double>();
            if (p.min) EXPECT_TRUE(p.min_exclusive ? v > *p.min : v >= *p.min) << d.id << "." << p.name;
            if (p.max) EXPECT_LE(v, *p.max) << d.id << "." << p.name;
        }
        // Defaults alone must validate, except where a scale is mandatory.
        if (d.id != "kernel-morph" && d.id != "stomata") EXPECT_NO_THROW(PipelineParams::from_json(d.id, json::object()));
    }
    EXPECT_EQ(ids.size(), 8u);
    const json fhb = descriptor_json(*find_pipeline("fhb-field"));
    const auto& params = fhb.at("params");
    const auto it = std::find_if(params.begin(), params.end(), [](const json& p) { return p.at("name") == "crop_padding"; });
    ASSERT_NE(it, params.end());
    EXPECT_DOUBLE_EQ(it->at("default").get<double>(), 0.1);
}

TEST(PipelineParams, ValidationErrors) {
    EXPECT_EQ(code_of([] { PipelineParams::from_json("frost", json::object()); }), ErrorCode::unknown_pipeline);
    EXPECT_EQ(code_of([] { PipelineParams::from_json("fdk", {{"conf_thresh", 1.5}}); }), ErrorCode::invalid_params);
    EXPECT_EQ(code_of([] { PipelineParams::from_json("fdk", {{"nms_iou", 0.0}}); }), ErrorCode::invalid_params);
    EXPECT_EQ(code_of([] { PipelineParams::from_json("fdk", {{"gsd_mm_per_px", 1.0}}); }), ErrorCode::invalid_params);
    EXPECT_EQ(code_of([] { PipelineParams::from_json("fdk", {{"area_weighted", 1}}); }), ErrorCode::invalid_params);
    EXPECT_EQ(code_of([] { PipelineParams::from_json("spike-uav", {{"tile_size", 256}, {"overlap", 256}}); }),
              ErrorCode::invalid_params);
    EXPECT_EQ(code_of([] { PipelineParams::from_json("spike-uav", {{"tile_size", 100.5}}); }), ErrorCode::invalid_params);
    EXPECT_EQ(code_of([] { PipelineParams::from_json("kernel-morph", json::object()); }), ErrorCode::calibration_required);
    EXPECT_EQ(code_of([] { PipelineParams::from_json("kernel-morph", {{"px_per_mm", 10.0}, {"marker_mm", 5.0}}); }),
              ErrorCode::invalid_params);
    EXPECT_EQ(code_of([] { PipelineParams::from_json("stomata", json::object()); }), ErrorCode::calibration_required);
    const auto p = PipelineParams::from_json("spike-uav", {{"tile_size", 512}, {"overlap", 64}, {"conf_thresh", 0.4}});
    EXPECT_EQ(p.tile_size, 512);
    EXPECT_EQ(p.overlap, 64);
    EXPECT_DOUBLE_EQ(p.inference().conf_thresh, 0.4);
}

TEST(JobStateMachine, TransitionTable) {
    const std::vector<JobState> all{JobState::queued, JobState::running, JobState::completed, JobState::failed,
                                    JobState::cancelled};
    std::set<std::pair<JobState, JobState>> legal{{JobState::queued, JobState::running},
                                                  {JobState::queued, JobState::cancelled},
                                                  {JobState::running, JobState::completed},
                                                  {JobState::running, JobState::failed},
                                                  {JobState::running, JobState::cancelled}};
    for (JobState a : all) {
        for (JobState b : all) EXPECT_EQ(legal_transition(a, b), legal.count({a, b}) == 1);
    }
    JobRecord r;
    r.history.push_back({JobState::queued, "t0"});
    transition(r, JobState::running, "t1");
    transition(r, JobState::completed, "t2");
    EXPECT_EQ(code_of([&] { transition(r, JobState::running, "t3"); }), ErrorCode::illegal_transition);
    EXPECT_EQ(r.history.size(), 3u);
}

TEST(JobStateMachine, RandomWalksStayLegal) {
    std::mt19937_64 rng(5);
    const std::vector<JobState> all{JobState::queued, JobState::running, JobState::completed, JobState::failed,
                                    JobState::cancelled};
    for (int trial = 0; trial < 500; ++trial) {
        JobRecord r;
        r.history.push_back({JobState::queued, "t"});
        for (int step = 0; step < 6; ++step) {
            const JobState to = all[rng() % all.size()];
            const bool ok = legal_transition(r.state, to);
            try {
                transition(r, to, "t");
                EXPECT_TRUE(ok);
            } catch (const Error&) {
                EXPECT_FALSE(ok);
            }
        }
        expect_legal_history(r);
    }
}

TEST(JobStore, RecordRoundTripAndAtomicWrites) {
    TempDir tmp;
    JobStore store(tmp.path / "jobs");
    JobRecord r;
    r.job_id = "j1";
    r.spec.pipeline_id = "fdk";
    r.spec.image_ids = {"a", "b"};
    r.spec.params = {{"conf_thresh", 0.5}};
    r.total = 2;
    r.submitted_at = "2024-01-01T00:00:00.000Z";
    r.history.push_back({JobState::queued, r.submitted_at});
    store.create(r);
    transition(r, JobState::running, "2024-01-01T00:00:01.000Z");
    r.started_at = "2024-01-01T00:00:01.000Z";
    r.done = 1;
    r.error = JobFailure{"x", "y"};
    store.save_status(r);
    const JobRecord back = store.load("j1");
    EXPECT_EQ(to_json(back), to_json(r));
    EXPECT_EQ(code_of([&] { store.load("nope"); }), ErrorCode::unknown_job);
    EXPECT_EQ(code_of([&] { store.load("../jobs"); }), ErrorCode::unknown_job);
    for (const auto& e : std::filesystem::directory_iterator(store.job_dir("j1"))) {
        EXPECT_EQ(e.path().extension(), ".json") << "temp file left behind: " << e.path();
    }
}

TEST(ImageStore, ContentAddressedAndIdempotent) {
    TempDir tmp;
    ImageStore store(tmp.path);
    const auto path = wheatai::testing::fixture_images("fdk").front();
    const std::string bytes = slurp(path);
    const auto a = store.put(bytes, "first.png");
    const auto b = store.put(bytes, "second.png");
    EXPECT_EQ(a.image_id, b.image_id);
    EXPECT_EQ(b.filename, "first.png");
    EXPECT_EQ(a.image_id.size(), 64u);
    EXPECT_EQ(a.format, "png");
    EXPECT_EQ(slurp(a.path), bytes);
    // SHA-256 of the empty string, a fixed reference value.
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(code_of([&] { store.put("hello, world", "notes.txt"); }), ErrorCode::unsupported_format);
    EXPECT_EQ(sniff_image_format("\xFF\xD8\xFF\xE0rest"), "jpeg");
    EXPECT_FALSE(store.find("not-an-id"));
    const auto odd = store.put(std::string("\x89PNG\r\n\x1a\n", 8) + "x", "../../evil name.png");
    EXPECT_EQ(odd.filename, "evil_name.png");
    EXPECT_EQ(odd.path.parent_path(), tmp.path / odd.image_id);
}

TEST(Scheduler, SubmitValidatesAndPersistsQueued) {
    TempDir tmp;
    JobScheduler s(tmp.path);
    JobSpec spec = fixture_spec(s, "fdk");
    const std::string id = s.submit(spec);
    const JobRecord r = s.status(id);
    EXPECT_EQ(r.state, JobState::queued);
    EXPECT_EQ(r.done, 0u);
    EXPECT_EQ(r.total, 3u);
    EXPECT_EQ(s.jobs().load(id).state, JobState::queued);

    JobSpec bad = spec;
    bad.pipeline_id = "frost";
    EXPECT_EQ(code_of([&] { s.submit(bad); }), ErrorCode::unknown_pipeline);
    bad = spec;
    bad.image_ids.push_back(bad.image_ids.front());
    EXPECT_EQ(code_of([&] { s.submit(bad); }), ErrorCode::invalid_params);
    bad = spec;
    bad.image_ids.clear();
    EXPECT_EQ(code_of([&] { s.submit(bad); }), ErrorCode::invalid_params);
    bad = spec;
    bad.image_ids.push_back(std::string(64, 'a'));
    EXPECT_EQ(code_of([&] { s.submit(bad); }), ErrorCode::unknown_image);
    bad = spec;
    bad.params = {{"conf_thresh", -1}};
    EXPECT_EQ(code_of([&] { s.submit(bad); }), ErrorCode::invalid_params);
    bad = spec;
    bad.backend_ref = "missing";
    EXPECT_EQ(code_of([&] { s.submit(bad); }), ErrorCode::unknown_backend);
    bad.backend_ref = "../escape";
    EXPECT_EQ(code_of([&] { s.submit(bad); }), ErrorCode::unknown_backend);
    EXPECT_EQ(code_of([&] { s.status("j-unknown"); }), ErrorCode::unknown_job);
    EXPECT_EQ(code_of([&] { s.cancel("j-unknown"); }), ErrorCode::unknown_job);
}

TEST(Scheduler, ExecutesToCompletionWithResults) {
    TempDir tmp;
    JobScheduler s(tmp.path, {.workers = 2});
    s.start();
    const std::string id = s.submit(fixture_spec(s, "fdk"));
    const JobRecord r = s.wait(id, 30s);
    ASSERT_EQ(r.state, JobState::completed);
    EXPECT_EQ(r.done, 3u);
    EXPECT_EQ(r.total, 3u);
    expect_legal_history(r);
    EXPECT_EQ(r.result_paths.at("csv"), json::array({"fdk.csv"}));
    const auto dir = s.jobs().job_dir(id);
    const json results = json::parse(slurp(dir / "results.json"));
    ASSERT_EQ(results.at("images").size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(results["images"][i]["image_id"], r.spec.image_ids[i]);
        EXPECT_EQ(results["images"][i]["status"], "ok");
    }
    EXPECT_EQ(slurp(dir / "fdk.csv"), slurp(wheatai::testing::golden_root() / "fdk" / "fdk.csv"));
    EXPECT_TRUE(std::filesystem::is_regular_file(dir / "overlays" / (r.spec.image_ids[0] + ".png")));
    EXPECT_EQ(claims_for(s.jobs(), id), 1u);
}

TEST(Scheduler, OneImageWithoutPredictionsIsAWarning) {
    TempDir tmp;
    JobScheduler s(tmp.path);
    s.start();
    JobSpec spec = fixture_spec(s, "fdk");
    // A spike image has no fdk predictions.
    const auto stray = wheatai::testing::fixture_images("spike").front();
    spec.image_ids.push_back(s.images().put(slurp(stray), "LOT-99_x.png").image_id);
    const std::string id = s.submit(spec);
    const JobRecord r = s.wait(id, 30s);
    ASSERT_EQ(r.state, JobState::completed);
    const json results = json::parse(slurp(s.jobs().job_dir(id) / "results.json"));
    ASSERT_EQ(results["images"].size(), 4u);
    EXPECT_EQ(results["images"][3]["status"], "failed");
    EXPECT_EQ(results["images"][3]["error"]["code"], "missing_prediction");
    EXPECT_EQ(results["images"][3]["warnings"][0]["code"], "missing_prediction");
    EXPECT_EQ(results["summary"]["images_ok"], 3);
    // The failed image has no CSV row.
    EXPECT_EQ(slurp(s.jobs().job_dir(id) / "fdk.csv"), slurp(wheatai::testing::golden_root() / "fdk" / "fdk.csv"));
}

TEST(Scheduler, AllImagesFailingFailsTheJob) {
    TempDir tmp;
    JobScheduler s(tmp.path);
    s.start();
    JobSpec spec = fixture_spec(s, "spike");
    spec.pipeline_id = "fdk";
    spec.params = json::object();
    spec.backend_ref = (wheatai::testing::fixture_root() / "fdk" / "preds").string();
    const JobRecord r = s.wait(s.submit(spec), 30s);
    EXPECT_EQ(r.state, JobState::failed);
    ASSERT_TRUE(r.error);
    EXPECT_EQ(r.error->code, "all_images_failed");
    expect_legal_history(r);
}

TEST(Scheduler, CancelQueuedNeverRuns) {
    TempDir tmp;
    JobScheduler s(tmp.path);
    const std::string id = s.submit(fixture_spec(s, "fdk"));
    const JobRecord c = s.cancel(id);
    EXPECT_EQ(c.state, JobState::cancelled);
    s.start();
    const std::string other = s.submit(fixture_spec(s, "fdk"));
    ASSERT_EQ(s.wait(other, 30s).state, JobState::completed);
    const JobRecord r = s.status(id);
    EXPECT_EQ(r.state, JobState::cancelled);
    EXPECT_FALSE(r.started_at);
    EXPECT_EQ(claims_for(s.jobs(), id), 0u);
    EXPECT_FALSE(std::filesystem::exists(s.jobs().job_dir(id) / "results.json"));
    expect_legal_history(s.jobs().load(id));
}

TEST(Scheduler, CancelRunningStopsAtImageBoundary) {
    TempDir tmp;
    JobScheduler* self = nullptr;
    SchedulerOptions opts;
    opts.on_progress = [&](const std::string& id, std::size_t done) {
        if (done == 1) self->cancel(id);
    };
    JobScheduler s(tmp.path, opts);
    self = &s;
    s.start();
    const std::string id = s.submit(fixture_spec(s, "fdk"));
    const JobRecord r = s.wait(id, 30s);
    ASSERT_EQ(r.state, JobState::cancelled);
    EXPECT_EQ(r.done, 1u);
    EXPECT_TRUE(r.cancel_requested);
    expect_legal_history(s.jobs().load(id));
    const json results = json::parse(slurp(s.jobs().job_dir(id) / "results.json"));
    EXPECT_EQ(results["images"].size(), 1u);
    EXPECT_TRUE(results["summary"]["cancelled"].get<bool>());
}

TEST(Scheduler, CancelCompletedIsNoOp) {
    TempDir tmp;
    JobScheduler s(tmp.path);
    const JobRecord done = s.run_sync(fixture_spec(s, "fdk"));
    ASSERT_EQ(done.state, JobState::completed);
    EXPECT_EQ(s.cancel(done.job_id).state, JobState::completed);
    EXPECT_EQ(s.jobs().load(done.job_id).state, JobState::completed);
    EXPECT_EQ(s.jobs().claims().back(), std::make_pair(done.job_id, std::string("sync")));
}

TEST(Scheduler, QueuedJobSurvivesRestart) {
    TempDir tmp;
    std::string id;
    {
        JobScheduler s(tmp.path);
        id = s.submit(fixture_spec(s, "fhb-single"));
    }
    JobScheduler s(tmp.path);
    s.start();
    const JobRecord r = s.wait(id, 30s);
    EXPECT_EQ(r.state, JobState::completed);
    EXPECT_EQ(claims_for(s.jobs(), id), 1u);
}

TEST(Scheduler, RunningJobFromDeadProcessBecomesInterrupted) {
    TempDir tmp;
    std::string id;
    {
        JobScheduler s(tmp.path);
        id = s.submit(fixture_spec(s, "fdk"));
    }
    // What a process killed mid-job leaves behind: a claim and a running status.
    JobStore store(tmp.path / "jobs");
    JobRecord r = store.load(id);
    store.append_claim(id, "w0");
    transition(r, JobState::running, utc_timestamp());
    r.done = 1;
    store.save_status(r);

    JobScheduler s(tmp.path);
    s.start();
    const JobRecord after = s.wait(id, 5s);
    EXPECT_EQ(after.state, JobState::failed);
    ASSERT_TRUE(after.error);
    EXPECT_EQ(after.error->code, "interrupted");
    s.shutdown();
    EXPECT_EQ(claims_for(s.jobs(), id), 1u);
    expect_legal_history(s.jobs().load(id));
}

TEST(Scheduler, CsvIndependentOfWorkersAndConcurrency) {
    std::vector<std::string> outputs;
    for (int workers : {1, 4}) {
        for (int per_job : {1, 4}) {
            TempDir tmp;
            JobScheduler s(tmp.path, {.workers = workers, .per_job_concurrency = per_job});
            s.start();
            std::vector<std::string> ids;
            for (const auto& p : {"spikelet", "stomata", "kernel-morph"}) ids.push_back(s.submit(fixture_spec(s, p)));
            std::string all;
            for (const auto& id : ids) {
                const JobRecord r = s.wait(id, 60s);
                ASSERT_EQ(r.state, JobState::completed);
                for (const auto& f : r.result_paths["csv"]) all += slurp(s.jobs().job_dir(id) / f.get<std::string>());
            }
            outputs.push_back(all);
        }
    }
    for (const auto& o : outputs) EXPECT_EQ(o, outputs.front());
}

TEST(Runner, ImageStemAndRowOrder) {
    EXPECT_EQ(image_stem("SD2024-017_1.jpg"), "SD2024-017_1");
    EXPECT_EQ(image_stem("a.b.png"), "a.b");
    BatchResult batch{"fdk", json::object(), {}, false};
    for (const char* name : {"b.png", "a.png"}) {
        ImageOutcome o{name, name, std::nullopt, {}, nullptr, {{std::string(name)}}, {}};
        batch.images.push_back(o);
    }
    const auto rows = collect_rows(batch, false);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(std::get<std::string>(rows[0][0]), "a.png");
    // results.json keeps submission order.
    EXPECT_EQ(results_json(batch)["images"][0]["image"], "b.png");
}
