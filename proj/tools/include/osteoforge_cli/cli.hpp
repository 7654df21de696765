#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace osteoforge::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitGeometry = 2,
  kExitInternal = 3,
};

/// Runs one `osteoforge` invocation; `args` excludes the program name.
/// Normal output goes to `out`; log lines and the JSON error object go to
/// `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace osteoforge::cli
