#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace earsleep::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kInfeasible = 3, kInternalError = 4 };

/// Runs one subcommand. `args` excludes the program name. Diagnostics go to
/// `err`, human-readable summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Name of the resolved-config sidecar written into every output directory.
inline constexpr const char* kResolvedConfigFile = "run_config.txt";

}  // namespace earsleep::cli
