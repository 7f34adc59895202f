#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace haste::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

/// Entry point behind the `haste` executable. argv[0] is the program name.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace haste::cli
