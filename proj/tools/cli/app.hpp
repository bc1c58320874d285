#pragma once

#include <ostream>

namespace flowlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

/// Parses argv, runs one subcommand and maps failures to exit codes:
/// 0 success, 1 domain error (module-qualified message on `err`), 2 usage error.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace flowlab::cli
