#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace laplab::cli
{
    // Runs one subcommand. args excludes the program name.
    // Exit codes: 0 success, 1 runtime error, 2 invalid input.
    int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
}
