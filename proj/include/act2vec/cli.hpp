#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace act2vec::cli {

// Dispatches one subcommand. Usage errors return 2, runtime errors 1, failed suites 1.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_file(const std::string& path);
std::string toolkit_version();

}  // namespace act2vec::cli
