#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace backflow::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitNumeric = 3,
  kExitIo = 4,
};

/// Environment variable naming the directory for run records written
/// without an explicit --out.
inline constexpr const char* kOutDirEnv = "BACKFLOW_OUT_DIR";

/// Parses `args` (without the program name), runs the command, writes its
/// run record and prints the outputs as JSON on `out`. Diagnostics and
/// progress lines go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace backflow::cli
