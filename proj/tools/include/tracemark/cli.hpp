#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tracemark::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainFailure = 1;
inline constexpr int kExitUsage = 2;

/// Relative paths are resolved against this directory when it is set.
inline constexpr const char* kWorkspaceEnv = "TRACEMARK_WORKSPACE";

/// Runs one command (`args` excludes the program name). Human-readable
/// output goes first, followed by NDJSON records, all on `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tracemark::cli
