#pragma once

#include <iosfwd>

namespace sattn {

/// Runs one CLI invocation. Returns 0 on success, 2 on usage errors and 1 on
/// runtime failures (including a failed gradient check).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sattn
