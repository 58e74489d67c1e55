#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kmesn::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

/// Runs the command line `args` (without the program name). Regular output
/// goes to `out`, diagnostics to `err`. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kmesn::cli
