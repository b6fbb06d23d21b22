#pragma once

#include <ostream>

#include "lmflow/error.hpp"

namespace lmflow::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kIoError = 3,
  kDataError = 4,
  kNumericalError = 5,
};

/// Exit code class of a library error.
int exit_code_for(ErrorCode code, bool has_row = false);

/// Entry point of the `lmflow` command. Subcommands: estimate, evaluate,
/// placebo, shift, equilibrium, synth. Failures print one JSON object on
/// `err` and leave the output directory untouched.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lmflow::cli
