#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fscil::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Parses `args` (without the program name), runs the chosen subcommand and
/// returns the process exit code. Normal output goes to `out`, diagnostics
/// to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fscil::cli
