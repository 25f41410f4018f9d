#ifndef SPFIT_CLI_HPP
#define SPFIT_CLI_HPP

#include <string>
#include <vector>

namespace spfit::cli {

// Dispatch a CLI invocation (argv without the program name).
// Exit codes: 0 success, 2 input error, 3 numerical failure,
// 4 convergence-criteria failure under --strict.
int run(const std::vector<std::string>& args);

}  // namespace spfit::cli

#endif
