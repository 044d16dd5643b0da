#pragma once

#include <iosfwd>

namespace heat {

/// Exit codes: 0 success, 1 usage error, 2 runtime/data error.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace heat
