#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vpcrf::cli {

// Runs the command line `args` (args[0] is the program name). Tables go to
// `out`, diagnostics to `err`. Returns the process exit code:
// 0 success, 1 numeric/runtime failure, 2 usage/config/data error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vpcrf::cli
