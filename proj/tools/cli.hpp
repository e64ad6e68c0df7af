#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace kontext::cli {

/// Runs the command line. Returns 0 on success, 1 on domain errors and 2 on
/// usage errors. Results go to `out`, diagnostics to `err`.
int run(std::vector<std::string> const &args, std::ostream &out, std::ostream &err);

}  // namespace kontext::cli
