#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gsgs {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the `gsgs` tool. args[0] is the program name. Returns the
// process exit code; never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gsgs
