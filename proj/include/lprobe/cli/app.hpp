#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lprobe::cli {

/// Parses arguments (without the program name), runs one subcommand and
/// returns the process exit code: 0 ok, 2 validation, 3 I/O, 4 numerical.
/// The run summary goes to `out` as one JSON line; logs go to stderr.
int run(const std::vector<std::string>& args, std::ostream& out);

}  // namespace lprobe::cli
