#pragma once

#include <iosfwd>

namespace mca::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kIo = 3,
  kNumerical = 4,
};

/// Parses argv, runs one subcommand and maps errors onto exit codes.
/// Normal output goes to `out`, diagnostics to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mca::cli
