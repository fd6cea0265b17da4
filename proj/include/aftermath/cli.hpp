#pragma once

#include <string>
#include <vector>

namespace aftermath::cli {

// Exit codes, stable for scripting.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIngest = 2;
inline constexpr int kExitAssessment = 3;
inline constexpr int kExitDataset = 4;
inline constexpr int kExitConfig = 5;

/// Full command-line entry point (argv[0] is the program name).
int run(int argc, const char* const* argv);

/// Convenience overload for tests; args exclude the program name.
int run(const std::vector<std::string>& args);

}  // namespace aftermath::cli
