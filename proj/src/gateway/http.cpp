#include "wheatai/gateway/http.hpp"

#include <sys/socket.h>

#include <regex>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "wheatai/error.hpp"
#include "wheatai/jobs/pipeline.hpp"

namespace wheatai::gateway {

namespace fs = std::filesystem;
using nlohmann::json;

int http_status_for(std::string_view code) noexcept {
    if (code == "unknown_job" || code == "unknown_image" || code == "not_found") return 404;
    if (code == "job_not_finished" || code == "job_not_completed") return 409;
    if (code == "payload_too_large") return 413;
    if (code == "unsupported_format") return 415;
    if (code == "io_error" || code == "internal_error") return 500;
    return 400;
}

namespace {

// Codes for statuses httplib produces on its own (no route, oversized body).
std::string_view code_for_status(int status) {
    switch (status) {
        case 400: return "invalid_request";
        case 404: return "not_found";
        case 405: return "method_not_allowed";
        case 413: return "payload_too_large";
        case 415: return "unsupported_format";
        default: return status >= 500 ? "internal_error" : "invalid_request";
    }
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, std::string_view code, const std::string& message) {
    send_json(res, http_status_for(code), {{"code", code}, {"message", message}});
}

void send_error(httplib::Response& res, const Error& e) {
    send_error(res, e.code_name(), e.what());
}

}  // namespace

struct ApiServer::Impl {
    jobs::JobScheduler& scheduler;
    GatewayOptions options;
    httplib::Server server;

    Impl(jobs::JobScheduler& s, GatewayOptions o) : scheduler(s), options(std::move(o)) { routes(); }

    void routes();
    void upload(const httplib::Request& req, httplib::Response& res);
    void submit(const httplib::Request& req, httplib::Response& res);
    // Record of a completed job, or an error already written to `res`.
    std::optional<jobs::JobRecord> completed_job(const std::string& id, httplib::Response& res);
    void serve_file(httplib::Response& res, const fs::path& path, const char* content_type);
};

void ApiServer::Impl::routes() {
    server.set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    // Leave room for multipart framing; the file itself is checked exactly.
    server.set_payload_max_length(options.max_upload_bytes + (1u << 20));
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
        const std::string_view code = code_for_status(res.status);
        res.set_content(json{{"code", code}, {"message", httplib::status_message(res.status)}}.dump(),
                        "application/json");
        return httplib::Server::HandlerResponse::Handled;
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
        send_error(res, "internal_error", "internal error");
    });
    if (!options.cors_origin.empty()) {
        server.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                                    {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                    {"Access-Control-Allow-Headers", "Content-Type"}});
        server.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    }

    server.Get("/api/v1/health", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}});
    });
    server.Get("/api/v1/pipelines", [](const httplib::Request&, httplib::Response& res) {
        json list = json::array();
        for (const auto& d : jobs::pipeline_descriptors()) list.push_back(jobs::descriptor_json(d));
        send_json(res, 200, {{"pipelines", list}});
    });
    server.Post("/api/v1/images", [this](const httplib::Request& req, httplib::Response& res) { upload(req, res); });
    server.Post("/api/v1/jobs", [this](const httplib::Request& req, httplib::Response& res) { submit(req, res); });
    server.Get(R"(/api/v1/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            send_json(res, 200, jobs::to_json(scheduler.status(req.matches[1])));
        } catch (const Error& e) {
            send_error(res, e);
        }
    });
    server.Post(R"(/api/v1/jobs/([^/]+)/cancel)", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            send_json(res, 200, jobs::to_json(scheduler.cancel(req.matches[1])));
        } catch (const Error& e) {
            send_error(res, e);
        }
    });
    server.Get(R"(/api/v1/jobs/([^/]+)/results)", [this](const httplib::Request& req, httplib::Response& res) {
        if (const auto r = completed_job(req.matches[1], res)) {
            serve_file(res, scheduler.jobs().job_dir(r->job_id) / "results.json", "application/json");
        }
    });
    server.Get(R"(/api/v1/jobs/([^/]+)/results\.csv)", [this](const httplib::Request& req, httplib::Response& res) {
        const auto r = completed_job(req.matches[1], res);
        if (!r) return;
        const auto& csvs = r->result_paths.at("csv");
        // ?table=summary selects the per-image summary table where one exists.
        const bool summary = req.get_param_value("table") == "summary";
        if (summary && csvs.size() < 2) {
            send_error(res, "not_found", fmt::format("pipeline '{}' has no summary table", r->spec.pipeline_id));
            return;
        }
        const std::string name = csvs.at(summary ? 1 : 0).get<std::string>();
        serve_file(res, scheduler.jobs().job_dir(r->job_id) / name, "text/csv; charset=utf-8");
        res.set_header("Content-Disposition", fmt::format("attachment; filename=\"{}\"", name));
    });
    server.Get(R"(/api/v1/jobs/([^/]+)/overlays/([0-9a-zA-Z_.-]+)\.png)",
               [this](const httplib::Request& req, httplib::Response& res) {
                   const auto r = completed_job(req.matches[1], res);
                   if (!r) return;
                   const std::string image_id = req.matches[2];
                   const auto& ids = r->spec.image_ids;
                   const fs::path path = scheduler.jobs().job_dir(r->job_id) / "overlays" / (image_id + ".png");
                   if (std::find(ids.begin(), ids.end(), image_id) == ids.end() || !fs::is_regular_file(path)) {
                       send_error(res, "unknown_image", fmt::format("no overlay for image '{}' in this job", image_id));
                       return;
                   }
                   serve_file(res, path, "image/png");
               });
    if (!options.static_dir.empty()) {
        server.set_mount_point("/", options.static_dir.string());
    }
}

void ApiServer::Impl::upload(const httplib::Request& req, httplib::Response& res) {
    std::string_view bytes;
    std::string filename;
    if (req.is_multipart_form_data()) {
        if (req.files.empty()) {
            send_error(res, "invalid_request", "multipart body has no file part");
            return;
        }
        const auto it = req.files.find("file");
        const auto& part = it != req.files.end() ? it->second : req.files.begin()->second;
        bytes = part.content;
        filename = part.filename;
    } else {
        bytes = req.body;
        filename = req.get_param_value("filename");
    }
    if (bytes.size() > options.max_upload_bytes) {
        send_error(res, "payload_too_large",
                   fmt::format("image is {} bytes, limit is {}", bytes.size(), options.max_upload_bytes));
        return;
    }
    try {
        send_json(res, 200, jobs::to_json(scheduler.images().put(bytes, filename.empty() ? "upload" : filename)));
    } catch (const Error& e) {
        send_error(res, e);
    }
}

void ApiServer::Impl::submit(const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
        send_error(res, "invalid_request", "body must be a JSON object");
        return;
    }
    const std::string mode = body.value("mode", std::string("bulk"));
    if (mode != "bulk" && mode != "single") {
        send_error(res, "invalid_request", fmt::format("mode must be 'bulk' or 'single', got '{}'", mode));
        return;
    }
    try {
        const jobs::JobSpec spec = jobs::spec_from_json(body);
        if (mode == "single") {
            if (spec.image_ids.size() != 1) {
                send_error(res, "single_mode_one_image",
                           fmt::format("single mode takes exactly one image, got {}", spec.image_ids.size()));
                return;
            }
            const jobs::JobRecord r = scheduler.run_sync(spec);
            json doc = jobs::to_json(r);
            const fs::path results = scheduler.jobs().job_dir(r.job_id) / "results.json";
            doc["results"] = fs::is_regular_file(results) ? json::parse(jobs::read_file(results)) : json(nullptr);
            send_json(res, 200, doc);
            return;
        }
        const std::string id = scheduler.submit(spec);
        send_json(res, 202, jobs::to_json(scheduler.status(id)));
    } catch (const Error& e) {
        send_error(res, e);
    }
}

std::optional<jobs::JobRecord> ApiServer::Impl::completed_job(const std::string& id, httplib::Response& res) {
    try {
        jobs::JobRecord r = scheduler.status(id);
        if (r.state == jobs::JobState::completed) return r;
        if (jobs::is_terminal(r.state)) {
            send_error(res, "job_not_completed",
                       fmt::format("job '{}' ended {}; it has no results", id, jobs::state_name(r.state)));
        } else {
            send_error(res, "job_not_finished", fmt::format("job '{}' is {}", id, jobs::state_name(r.state)));
        }
    } catch (const Error& e) {
        send_error(res, e);
    }
    return std::nullopt;
}

void ApiServer::Impl::serve_file(httplib::Response& res, const fs::path& path, const char* content_type) {
    try {
        res.status = 200;
        res.set_content(jobs::read_file(path), content_type);
    } catch (const Error& e) {
        send_error(res, e);
    }
}

ApiServer::ApiServer(jobs::JobScheduler& scheduler, GatewayOptions options)
    : impl_(std::make_unique<Impl>(scheduler, std::move(options))) {}

ApiServer::~ApiServer() = default;

int ApiServer::bind(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                                : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound <= 0) throw Error(ErrorCode::io_error, fmt::format("cannot bind {}:{}", host, port));
    return bound;
}

bool ApiServer::listen() {
    return impl_->server.listen_after_bind();
}

void ApiServer::stop() {
    impl_->server.stop();
}

void ApiServer::wait_until_ready() const {
    impl_->server.wait_until_ready();
}

}  // namespace wheatai::gateway
