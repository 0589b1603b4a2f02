#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace glassbox::cli {

// Stable exit codes for harnesses.
enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kUsageError = 2 };

// Default output root when --out is not given: $GLASSBOX_OUTPUT_ROOT or ./runs.
inline constexpr const char* kOutputRootEnv = "GLASSBOX_OUTPUT_ROOT";

// Entry point shared by the binary and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace glassbox::cli
