#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nertag::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kDataError = 2;
inline constexpr int kNumericError = 3;

// Runs one subcommand (train, predict, evaluate, inspect). `args` excludes
// the program name. Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Reads a flat "key=value" config file into "--key=value" arguments.
// Blank lines and lines starting with '#' are skipped; '_' in keys maps to '-'.
std::vector<std::string> read_config_args(const std::string& path);

}  // namespace nertag::cli
