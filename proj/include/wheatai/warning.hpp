#pragma once

#include <string>
#include <vector>

namespace wheatai {

/// Non-fatal condition attached to a result. `code` is a stable snake_case
/// identifier.
struct Warning {
    std::string code;
    std::string message;
};

using Warnings = std::vector<Warning>;

}  // namespace wheatai
