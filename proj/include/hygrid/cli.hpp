#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hygrid {

/// Command-line driver. `args` excludes the program name.
/// Exit codes: 0 success / pass, 1 input error, 2 checks fail, 3 indeterminate.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hygrid
