#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

#include "wheatai/jobs/scheduler.hpp"

namespace wheatai::gateway {

inline constexpr std::size_t kDefaultMaxUploadBytes = 64u << 20;

struct GatewayOptions {
    std::filesystem::path static_dir;  // served at "/" when set
    std::size_t max_upload_bytes = kDefaultMaxUploadBytes;
    std::string cors_origin;  // no CORS headers when empty
};

/// HTTP status for a pipeline or job error code.
int http_status_for(std::string_view code) noexcept;

/// The /api/v1 surface over a scheduler. Error bodies are always
/// {"code": ..., "message": ...}.
class ApiServer {
public:
    ApiServer(jobs::JobScheduler& scheduler, GatewayOptions options);
    ~ApiServer();

    /// Binds without SO_REUSEPORT, so an occupied port fails. Port 0 picks a
    /// free one. Returns the bound port. Throws Error(io_error).
    int bind(const std::string& host, int port);
    /// Serves until stop(); returns false if the server failed.
    bool listen();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace wheatai::gateway
