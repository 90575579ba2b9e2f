#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace activepool {

/// Command-line entry point. `args` includes the program name. Data goes to
/// the --out file when given, otherwise to `out`; diagnostics and progress
/// go to `err`. Returns the process exit status.
int parse_and_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace activepool
