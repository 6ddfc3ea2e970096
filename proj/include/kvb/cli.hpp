#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kvb::cli {

// Exit statuses. Stable: scripts depend on them.
inline constexpr int kOk = 0;
inline constexpr int kVerdictFailed = 1;  // math error or a failed verdict
inline constexpr int kInputError = 2;     // unreadable / malformed input, bad flags
inline constexpr int kValidationError = 3;  // well-formed problem failing validate()

/// Runs one command line (args[0] is the program name). The report goes to
/// `out` unless --out names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kvb::cli
