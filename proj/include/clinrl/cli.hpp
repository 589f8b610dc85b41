#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace clinrl {

/// Command-line entry point. Returns 0 on success, 2 on usage errors and 1
/// on runtime errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clinrl
