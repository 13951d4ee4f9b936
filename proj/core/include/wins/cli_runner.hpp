#pragma once

namespace wins {

/// Entry point shared by the wins binary and the tests. Exit codes:
/// 0 thresholds met (or none configured), 1 pipeline error, 2 config error,
/// 3 thresholds violated.
int run_cli(int argc, const char* const* argv);

}  // namespace wins
