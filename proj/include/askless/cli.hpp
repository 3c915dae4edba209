#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace askless::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2 };

// Runs the `askless` command line. `args` excludes the program name.
// Results go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace askless::cli
