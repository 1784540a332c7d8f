#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace neuroexc {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3 };

/// Runs the command line `args` (args[0] is the program name). Reports go to
/// `out`, diagnostics and usage text to `err`.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace neuroexc
