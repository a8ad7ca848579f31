#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace miaudit {

inline constexpr std::string_view kToolName = "miaudit";
inline constexpr std::string_view kToolVersion = "0.1.0";

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitNumericError = 3;

// Runs the CLI with `args` (excluding the program name). Reports go to the
// paths named by --output, or to `out` when the path is "-"; diagnostics and
// progress go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Removes the "generated_at" line from a report, for byte comparisons.
std::string mask_timestamp(std::string_view report);

}  // namespace miaudit
