#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace evgrid::cli {

/// Entry point shared by the binary and the tests. Returns the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evgrid::cli
