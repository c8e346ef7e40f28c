#pragma once

#include <iosfwd>

namespace eit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitPartial = 2;

/// The eitbench command line: generate | reconstruct | evaluate.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eit
