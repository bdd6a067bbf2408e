#pragma once

#include <iosfwd>
#include <string>

namespace pnnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `pnnet` invocation. Summary scalars go to `out`, everything else
/// to `err`. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Shortest round-trip decimal, always with a fractional part ("0.0", "0.25").
std::string format_scalar(double v);

}  // namespace pnnet::cli
