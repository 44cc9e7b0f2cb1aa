#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace setnet::cli {

/// Process exit codes.
enum ExitCode : int {
    ok = 0,
    usage = 1,
    config = 2,
    format = 3,
    numeric = 4,
    budget = 5,
    failure = 6,
};

/// Runs one invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace setnet::cli
