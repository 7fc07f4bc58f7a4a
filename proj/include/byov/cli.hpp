#pragma once

#include <string>
#include <vector>

namespace byov::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kIoError = 3, kNumericError = 4 };

// Entry point for the `byov` executable; returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace byov::cli
