#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace involve {

// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitUsage = 2,  // bad flags, bad config, unusable input data
    kExitModel = 3,  // model, embedder or generator failure
    kExitIo = 4,     // read or write failure
};

int exit_code_for(const std::exception& e);

// Entry point of the `involve` tool. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace involve
