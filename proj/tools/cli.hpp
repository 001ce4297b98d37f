#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace angle_i2p::cli {

/// Parses `args` (without the program name) and runs one command. Returns
/// the process exit status: 0 on success, 1 on a failed run, 2 on usage or
/// configuration errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace angle_i2p::cli
