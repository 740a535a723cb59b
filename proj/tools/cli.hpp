#pragma once

#include <string>
#include <vector>

namespace voxsl {

// Dispatches the CLI subcommands (gen-patterns, simulate, train, eval,
// export-depth-vis). Returns 0 on success, 1 on usage errors, 2 on data
// errors.
int run_pipeline(const std::vector<std::string>& args);
int run_pipeline(int argc, const char* const* argv);

}  // namespace voxsl
