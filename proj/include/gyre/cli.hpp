#pragma once
#include <string>
#include <vector>

namespace gyre {

// Exit codes: 0 success, 2 usage/config error, 3 budget exhausted,
// 4 IO/corruption.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBudget = 3;
inline constexpr int kExitIo = 4;

int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace gyre
