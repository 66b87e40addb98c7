#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace msq::cli {

/// Runs one `msq` invocation. `args` excludes the program name.
/// Returns the process exit code: 0 success, 2 input error, 3 config error,
/// 4 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace msq::cli
