#include "wheatai/error.hpp"

namespace wheatai {

std::string_view code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_box: return "invalid_box";
        case ErrorCode::degenerate_input: return "degenerate_input";
        case ErrorCode::no_fiducials: return "no_fiducials";
        case ErrorCode::inconsistent_scale: return "inconsistent_scale";
        case ErrorCode::invalid_scale: return "invalid_scale";
        case ErrorCode::invalid_dictionary: return "invalid_dictionary";
        case ErrorCode::not_a_directory: return "not_a_directory";
        case ErrorCode::schema_violation: return "schema_violation";
        case ErrorCode::missing_prediction: return "missing_prediction";
        case ErrorCode::missing_mask: return "missing_mask";
        case ErrorCode::missing_verdict: return "missing_verdict";
        case ErrorCode::invalid_tiling: return "invalid_tiling";
        case ErrorCode::no_spikelets: return "no_spikelets";
        case ErrorCode::no_kernels: return "no_kernels";
        case ErrorCode::no_stomata: return "no_stomata";
        case ErrorCode::degenerate_mask: return "degenerate_mask";
        case ErrorCode::invalid_calibration: return "invalid_calibration";
        case ErrorCode::dimension_mismatch: return "dimension_mismatch";
        case ErrorCode::schema_mismatch: return "schema_mismatch";
        case ErrorCode::unknown_pipeline: return "unknown_pipeline";
        case ErrorCode::unknown_image: return "unknown_image";
        case ErrorCode::invalid_params: return "invalid_params";
        case ErrorCode::calibration_required: return "calibration_required";
        case ErrorCode::unknown_job: return "unknown_job";
        case ErrorCode::illegal_transition: return "illegal_transition";
        case ErrorCode::io_error: return "io_error";
        case ErrorCode::unsupported_format: return "unsupported_format";
        case ErrorCode::unknown_backend: return "unknown_backend";
    }
    return "unknown";
}

}  // namespace wheatai
