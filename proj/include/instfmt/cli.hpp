#pragma once

#include <string>
#include <vector>

namespace instfmt {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitValidation = 1,
    kExitBackend = 2,
    kExitThreshold = 3,
};

/// Entry point of the `instfmt` tool; argv[0] is the program name.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace instfmt
