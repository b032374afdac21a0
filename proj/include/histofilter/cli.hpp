#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace histofilter {

/// Runs one subcommand. Returns 0 on success, 1 on a domain error, 2 on a
/// usage error. Diagnostics and progress go to `err`; data goes to files.
int dispatch(int argc, const char* const* argv, std::ostream& err);

/// Convenience form; args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& err);

}  // namespace histofilter
