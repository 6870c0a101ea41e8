#pragma once

#include <iosfwd>

namespace ratiopt::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 success, 1 usage/config/data error, 2 non-convergence.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ratiopt::cli
