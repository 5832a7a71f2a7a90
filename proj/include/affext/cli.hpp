#pragma once

// Command-line driver. `run` is the whole program minus process plumbing so
// tests and bindings can call it in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace affext {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitNonConvergence = 2,
  kExitCertificate = 3,
};

/// args excludes the program name, e.g. {"gl-values", "--scenario", "gl.scn"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Maps the library's exception types to exit codes.
int exit_code_for_current_exception(std::ostream& err);

}  // namespace affext
