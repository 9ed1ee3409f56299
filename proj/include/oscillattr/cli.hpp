#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace oscillattr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitBlowUp = 3;

/// Tool version: semantic version plus `git describe` of the build tree.
std::string tool_version();

/// oscillattr <spectrum|check-conditions|simulate|attractor|rotation>
///            --config <path> [--out <dir>] [--workers <n>]
/// Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oscillattr
