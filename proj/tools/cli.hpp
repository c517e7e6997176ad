#pragma once

#include <string>
#include <vector>

namespace malfeed::cli {

/// Runs the malfeed command line. `args` excludes the program name.
/// Returns 0 on success, 1 on data errors, 2 on usage errors.
int run(const std::vector<std::string>& args);

}  // namespace malfeed::cli
