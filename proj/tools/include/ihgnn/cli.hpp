#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ihgnn::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kDataError = 2,
  kNumericalError = 3,
};

// Runs one subcommand (generate, train, evaluate, gradcheck, ablate).
// `args` excludes the program name. Records go to `out` unless a report path
// is given; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ihgnn::cli
