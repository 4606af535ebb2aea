#pragma once

#include <string>
#include <vector>

namespace acosqe {

// Command-line front end, callable in-process for testing.  `args` excludes
// the program name.  Returns the process exit code: 0 success, 1 usage,
// 2 data error, 3 numeric failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace acosqe
