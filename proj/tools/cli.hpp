#pragma once

#include <string>
#include <vector>

namespace rbrnet::cli {

// Exit codes shared by every subcommand so CI can tell failure classes apart.
inline constexpr int kExitOk = 0;
inline constexpr int kExitBadArgs = 2;
inline constexpr int kExitDataError = 3;
inline constexpr int kExitNumericDivergence = 4;
inline constexpr int kExitBadCheckpoint = 5;
inline constexpr int kExitPerplexityInfeasible = 6;

/// Dispatch `rbrnet <subcommand> ...`; args excludes argv[0].
int run(const std::vector<std::string>& args);

}  // namespace rbrnet::cli
