#pragma once

namespace wheatai::gateway {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitUsage = 2;

/// `run` (local batch over a directory) and `serve` (HTTP API).
int run_cli(int argc, char** argv);

}  // namespace wheatai::gateway
