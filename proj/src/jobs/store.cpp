#include "wheatai/jobs/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "wheatai/error.hpp"

namespace wheatai::jobs {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view state_name(JobState s) noexcept {
    switch (s) {
        case JobState::queued: return "queued";
        case JobState::running: return "running";
        case JobState::completed: return "completed";
        case JobState::failed: return "failed";
        case JobState::cancelled: return "cancelled";
    }
    return "queued";
}

JobState parse_state(std::string_view name) {
    for (JobState s : {JobState::queued, JobState::running, JobState::completed, JobState::failed,
                       JobState::cancelled}) {
        if (state_name(s) == name) return s;
    }
    throw Error(ErrorCode::schema_violation, fmt::format("unknown job state '{}'", name));
}

bool is_terminal(JobState s) noexcept {
    return s == JobState::completed || s == JobState::failed || s == JobState::cancelled;
}

bool legal_transition(JobState from, JobState to) noexcept {
    switch (from) {
        case JobState::queued: return to == JobState::running || to == JobState::cancelled;
        case JobState::running:
            return to == JobState::completed || to == JobState::failed || to == JobState::cancelled;
        default: return false;
    }
}

json to_json(const JobSpec& spec) {
    return {{"pipeline_id", spec.pipeline_id},
            {"image_ids", spec.image_ids},
            {"params", spec.params},
            {"backend_ref", spec.backend_ref}};
}

JobSpec spec_from_json(const json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::invalid_params, "job spec must be an object");
    JobSpec spec;
    const auto pid = doc.find("pipeline_id");
    if (pid == doc.end() || !pid->is_string()) {
        throw Error(ErrorCode::invalid_params, "'pipeline_id' must be a string");
    }
    spec.pipeline_id = pid->get<std::string>();
    const auto ids = doc.find("image_ids");
    if (ids == doc.end() || !ids->is_array()) {
        throw Error(ErrorCode::invalid_params, "'image_ids' must be an array of strings");
    }
    for (const json& id : *ids) {
        if (!id.is_string()) throw Error(ErrorCode::invalid_params, "'image_ids' must be an array of strings");
        spec.image_ids.push_back(id.get<std::string>());
    }
    if (const auto p = doc.find("params"); p != doc.end() && !p->is_null()) {
        if (!p->is_object()) throw Error(ErrorCode::invalid_params, "'params' must be an object");
        spec.params = *p;
    }
    if (const auto b = doc.find("backend_ref"); b != doc.end() && !b->is_null()) {
        if (!b->is_string() || b->get<std::string>().empty()) {
            throw Error(ErrorCode::invalid_params, "'backend_ref' must be a non-empty string");
        }
        spec.backend_ref = b->get<std::string>();
    }
    return spec;
}

namespace {

json opt(const std::optional<std::string>& s) {
    return s ? json(*s) : json(nullptr);
}

std::optional<std::string> opt_string(const json& doc, const char* key) {
    const auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

json status_json(const JobRecord& r) {
    json history = json::array();
    for (const auto& h : r.history) history.push_back({{"state", state_name(h.state)}, {"at", h.at}});
    return {{"job_id", r.job_id},
            {"state", state_name(r.state)},
            {"progress", {{"done", r.done}, {"total", r.total}}},
            {"submitted_at", r.submitted_at},
            {"started_at", opt(r.started_at)},
            {"finished_at", opt(r.finished_at)},
            {"error", r.error ? json{{"code", r.error->code}, {"message", r.error->message}} : json(nullptr)},
            {"cancel_requested", r.cancel_requested},
            {"result_paths", r.result_paths},
            {"history", history}};
}

json manifest_json(const JobRecord& r) {
    return {{"job_id", r.job_id}, {"spec", to_json(r.spec)}, {"submitted_at", r.submitted_at}};
}

void fsync_path(const fs::path& p, int flags) {
    const int fd = ::open(p.c_str(), flags);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
}

}  // namespace

json to_json(const JobRecord& r) {
    json doc = status_json(r);
    doc["spec"] = to_json(r.spec);
    return doc;
}

void transition(JobRecord& r, JobState to, std::string at) {
    if (!legal_transition(r.state, to)) {
        throw Error(ErrorCode::illegal_transition,
                    fmt::format("job {}: {} -> {} is not allowed", r.job_id, state_name(r.state), state_name(to)));
    }
    r.state = to;
    r.history.push_back({to, std::move(at)});
}

std::string utc_timestamp() {
    using namespace std::chrono;
    const auto now = system_clock::now();
    const std::time_t secs = system_clock::to_time_t(now);
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                       tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    static std::atomic<unsigned long> counter{0};
    const fs::path tmp = path.parent_path() /
                         fmt::format(".{}.{}.{}.tmp", path.filename().string(), ::getpid(), counter.fetch_add(1));
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw Error(ErrorCode::io_error, fmt::format("cannot create '{}'", tmp.string()));
    std::size_t off = 0;
    while (off < bytes.size()) {
        const ssize_t n = ::write(fd, bytes.data() + off, bytes.size() - off);
        if (n <= 0) {
            ::close(fd);
            fs::remove(tmp);
            throw Error(ErrorCode::io_error, fmt::format("cannot write '{}'", tmp.string()));
        }
        off += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::io_error, fmt::format("cannot rename onto '{}': {}", path.string(), ec.message()));
    fsync_path(path.parent_path(), O_RDONLY | O_DIRECTORY);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, fmt::format("cannot read '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

JobStore::JobStore(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
}

fs::path JobStore::job_dir(const std::string& job_id) const {
    return root_ / job_id;
}

void JobStore::create(const JobRecord& r) {
    const fs::path dir = job_dir(r.job_id);
    fs::create_directories(dir);
    write_file_atomic(dir / "manifest.json", manifest_json(r).dump(2) + "\n");
    save_status(r);
}

void JobStore::save_status(const JobRecord& r) {
    write_file_atomic(job_dir(r.job_id) / "status.json", status_json(r).dump(2) + "\n");
}

bool JobStore::exists(const std::string& job_id) const {
    // Ids never contain separators; anything else cannot name a job.
    if (job_id.empty() || job_id.find_first_of("/\\") != std::string::npos || job_id[0] == '.') return false;
    return fs::is_regular_file(job_dir(job_id) / "status.json");
}

JobRecord JobStore::load(const std::string& job_id) const {
    if (!exists(job_id)) throw Error(ErrorCode::unknown_job, fmt::format("unknown job '{}'", job_id));
    const fs::path dir = job_dir(job_id);
    const json manifest = json::parse(read_file(dir / "manifest.json"));
    const json status = json::parse(read_file(dir / "status.json"));
    JobRecord r;
    r.job_id = job_id;
    r.spec = spec_from_json(manifest.at("spec"));
    r.submitted_at = manifest.at("submitted_at").get<std::string>();
    r.state = parse_state(status.at("state").get<std::string>());
    r.done = status.at("progress").at("done").get<std::size_t>();
    r.total = status.at("progress").at("total").get<std::size_t>();
    r.started_at = opt_string(status, "started_at");
    r.finished_at = opt_string(status, "finished_at");
    if (const auto& e = status.at("error"); !e.is_null()) {
        r.error = JobFailure{e.at("code").get<std::string>(), e.at("message").get<std::string>()};
    }
    r.cancel_requested = status.value("cancel_requested", false);
    r.result_paths = status.at("result_paths");
    for (const json& h : status.at("history")) {
        r.history.push_back({parse_state(h.at("state").get<std::string>()), h.at("at").get<std::string>()});
    }
    return r;
}

std::vector<JobRecord> JobStore::load_all() const {
    std::vector<JobRecord> out;
    for (const auto& entry : fs::directory_iterator(root_)) {
        if (!entry.is_directory()) continue;
        const std::string id = entry.path().filename().string();
        if (exists(id)) out.push_back(load(id));
    }
    std::sort(out.begin(), out.end(), [](const JobRecord& a, const JobRecord& b) {
        return std::tie(a.submitted_at, a.job_id) < std::tie(b.submitted_at, b.job_id);
    });
    return out;
}

void JobStore::append_claim(const std::string& job_id, const std::string& worker) {
    std::lock_guard lock(claim_mutex_);
    const fs::path path = root_ / "claims.log";
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw Error(ErrorCode::io_error, "cannot open claims.log");
    const std::string line = fmt::format("{} {}\n", job_id, worker);
    const bool ok = ::write(fd, line.data(), line.size()) == static_cast<ssize_t>(line.size());
    ::fsync(fd);
    ::close(fd);
    if (!ok) throw Error(ErrorCode::io_error, "cannot append to claims.log");
}

std::vector<std::pair<std::string, std::string>> JobStore::claims() const {
    std::vector<std::pair<std::string, std::string>> out;
    std::ifstream in(root_ / "claims.log");
    std::string job, worker;
    while (in >> job >> worker) out.emplace_back(job, worker);
    return out;
}

json to_json(const StoredImage& img) {
    return {{"image_id", img.image_id}, {"filename", img.filename}, {"format", img.format}, {"bytes", img.bytes}};
}

std::optional<std::string> sniff_image_format(std::string_view bytes) {
    static constexpr std::string_view png = "\x89PNG\r\n\x1a\n";
    if (bytes.substr(0, png.size()) == png) return "png";
    if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
        static_cast<unsigned char>(bytes[1]) == 0xD8 && static_cast<unsigned char>(bytes[2]) == 0xFF) {
        return "jpeg";
    }
    return std::nullopt;
}

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::io_error, "SHA-256 failed");
    }
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

namespace {

std::string sanitize_filename(const std::string& name, const std::string& format) {
    std::string base = fs::path(name).filename().string();
    for (char& c : base) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
        if (!ok) c = '_';
    }
    if (base.empty() || base.front() == '.' || base == "meta.json") {
        base = "image" + std::string(format == "png" ? ".png" : ".jpg");
    }
    return base;
}

bool is_image_id(const std::string& id) {
    return id.size() == 64 && std::all_of(id.begin(), id.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

}  // namespace

ImageStore::ImageStore(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
}

StoredImage ImageStore::put(std::string_view bytes, const std::string& filename) {
    const auto format = sniff_image_format(bytes);
    if (!format) throw Error(ErrorCode::unsupported_format, "only PNG and JPEG images are accepted");
    const std::string id = sha256_hex(bytes);
    std::lock_guard lock(mutex_);
    if (auto existing = find(id)) return *existing;
    const fs::path dir = root_ / id;
    fs::create_directories(dir);
    StoredImage img{id, sanitize_filename(filename, *format), *format, bytes.size(), {}};
    img.path = dir / img.filename;
    write_file_atomic(img.path, bytes);
    // meta.json last: its presence marks a complete entry.
    write_file_atomic(dir / "meta.json", to_json(img).dump(2) + "\n");
    return img;
}

std::optional<StoredImage> ImageStore::find(const std::string& image_id) const {
    if (!is_image_id(image_id)) return std::nullopt;
    const fs::path meta = root_ / image_id / "meta.json";
    if (!fs::is_regular_file(meta)) return std::nullopt;
    const json doc = json::parse(read_file(meta));
    StoredImage img{image_id, doc.at("filename").get<std::string>(), doc.at("format").get<std::string>(),
                    doc.at("bytes").get<std::size_t>(), {}};
    img.path = root_ / image_id / img.filename;
    return img;
}

}  // namespace wheatai::jobs
