#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace halluc::cli {

/// Runs the command line. Returns 0 on pass, 1 on a bound violation and 2 on
/// a usage or configuration error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, with the arguments after the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace halluc::cli
