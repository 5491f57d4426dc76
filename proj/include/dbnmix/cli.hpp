#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dbnmix {

// Entry point for the `dbnmix` tool. args[0] is the program name.
// Returns 0 on success, 1 on a runtime/config error, 2 on a usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dbnmix
