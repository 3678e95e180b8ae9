#pragma once

#include <iosfwd>

namespace hardhat::cli {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;  // usage, validation, integrity and parse errors
inline constexpr int kExitIo = 2;       // missing or unwritable files

// Name of the environment variable holding the default config file path.
inline constexpr const char* kConfigEnv = "HARDHAT_CONFIG";

// Entry point of the `hardhat` tool. Reports go to `out` unless --out is
// given (then written atomically); progress and errors go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hardhat::cli
