// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace ftmp::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

// argv[0] is the program name. Returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace ftmp::cli
