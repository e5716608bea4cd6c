#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace railpf {

inline constexpr const char* kToolVersion = "1.0.0";

/// Entry point of the railpf command line; `args` excludes the program
/// name. Returns the process exit code. Failures print one line
/// "error: <Code>: <message>" to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace railpf
