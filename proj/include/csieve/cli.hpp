#pragma once

namespace csieve {

/// Parses argv and runs one subcommand (scan, calibrate, evaluate-ced,
/// evaluate-pv, simulate). Returns the process exit code: 0 success, 1 usage
/// error, 2 runtime error.
int run_cli(int argc, const char* const* argv);

}  // namespace csieve
