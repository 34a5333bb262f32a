#ifndef FISOR_CLI_HPP
#define FISOR_CLI_HPP

#include <string>
#include <vector>

namespace fisor::cli {

// Entry point behind the binary; returns the process exit code.
// 0 success, 2 config error, 3 data error, 4 training divergence,
// 64 usage errors. FISOR_OUT_ROOT sets the default output root.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace fisor::cli

#endif
