#pragma once

#include <iosfwd>

namespace bpreg::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,  // bad flags, unreadable or malformed input, domain violations
  kExitModel = 3,  // rank deficiency, non-convergence, too many failed refits
};

/// Entry point shared by the executable and the tests. argv[0] is the
/// program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bpreg::cli
