#pragma once

#include <exception>
#include <ostream>

namespace mapnet::cli {

enum ExitCode : int { ok = 0, internal = 1, config = 2, io = 3, numeric = 4, checkpoint = 5 };

// Maps a library exception onto the command's exit status.
int exit_code_for(const std::exception& e);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mapnet::cli
