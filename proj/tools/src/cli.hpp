#pragma once

#include <string>
#include <vector>

namespace fmprior::cli {

// Runs one `fmprior` invocation; args[0] is the program name. Returns the
// process exit status (0 ok, 2 usage, 3 data error, 4 numerical failure).
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace fmprior::cli
