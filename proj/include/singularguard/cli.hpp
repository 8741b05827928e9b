#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace singularguard::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `singularguard` tool. Records go to `out` as one JSON
/// object per line; diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
/// As above with an explicit stdin for `monitor --stdin`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace singularguard::cli
