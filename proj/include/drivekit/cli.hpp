#pragma once

#include <string>
#include <vector>

namespace drivekit::cli {

/// Runs one subcommand. Exit codes: 0 success, 1 pipeline error (an error
/// record goes to stderr and to `<out>.error.json` when an output path is
/// known), 2 usage error.
int run(int argc, const char* const* argv);

/// Same, with the program name left out of `args`.
int run(const std::vector<std::string>& args);

}  // namespace drivekit::cli
