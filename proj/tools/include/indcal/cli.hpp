#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace indcal::cli {

// Runs one `indcal` invocation. `args` excludes the program name.
// Returns 0 on success, 2 on usage or configuration errors, 1 otherwise.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace indcal::cli
