#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace shipsr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDependency = 3;

// args excludes the program name. Failures print one diagnostic line to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Applies SR_NUM_WORKERS (default 1) to the torch intra-op thread pool.
void configure_threads();

}  // namespace shipsr
