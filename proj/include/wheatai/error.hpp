#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wheatai {

// Stable error identifiers. The snake_case names returned by code_name() are
// part of the HTTP/CLI contract and must not change.
enum class ErrorCode {
    invalid_box,
    degenerate_input,
    no_fiducials,
    inconsistent_scale,
    invalid_scale,
    invalid_dictionary,
    not_a_directory,
    schema_violation,
    missing_prediction,
    missing_mask,
    missing_verdict,
    invalid_tiling,
    no_spikelets,
    no_kernels,
    no_stomata,
    degenerate_mask,
    invalid_calibration,
    dimension_mismatch,
    schema_mismatch,
    unknown_pipeline,
    unknown_image,
    invalid_params,
    calibration_required,
    unknown_job,
    illegal_transition,
    io_error,
    unsupported_format,
    unknown_backend,
};

std::string_view code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    std::string_view code_name() const noexcept { return wheatai::code_name(code_); }

private:
    ErrorCode code_;
};

}  // namespace wheatai
