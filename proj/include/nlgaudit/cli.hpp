#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nlgaudit::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kIoError = 1,
  kValidationError = 2,
  kNumericalError = 3,
};

// Environment variables named kEnvPrefix + FLAG (upper case, dashes as
// underscores) override config-file values; explicit flags override both.
inline constexpr const char* kEnvPrefix = "NLGAUDIT_";

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nlgaudit::cli
