#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace prefcf {

// Runs one `prefcf` command. `args` excludes the program name. Returns the
// process exit status: 0 on success, 1 on a failed command, 2 on a usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace prefcf
