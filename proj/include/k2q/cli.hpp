#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace k2q {

/// Exit statuses of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitInvalid = 1, kExitUsage = 2 };

/// Runs the tool on `args` (program name first). Reports go to `out`,
/// diagnostics to `err`. `color` enables ANSI styling of diagnostics; it is
/// forced off when K2Q_NO_COLOR is set.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            bool color = false);

}  // namespace k2q
