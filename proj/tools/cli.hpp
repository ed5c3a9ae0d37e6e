#pragma once

#include <iosfwd>

namespace smart::cli {

enum ExitCode : int { kOk = 0, kCellErrors = 1, kFatal = 2 };

/// Entry point of the `smart` command; argv[0] is the program name.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace smart::cli
