#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace astr::harness {

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kIoFailure = 2 };

/// Runs the built-in invariant checks, one line per check on `out`.
bool run_selfcheck(std::ostream& out);

/// Dispatches a subcommand. `args` excludes the program name. Data goes to
/// `out` or files, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace astr::harness
