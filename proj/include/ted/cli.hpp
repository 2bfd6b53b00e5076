#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ted {

inline constexpr const char* kCodeVersion = "0.1.0";

/// Exit codes: 0 ok, 1 usage/config, 2 input (missing file, bad record, format), 3 numeric.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ted
