#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace postfilter::cli {

/// Parses `args` (without the program name) and runs the chosen verb.
/// Returns the process exit code: 0 success, 1 failure, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace postfilter::cli
