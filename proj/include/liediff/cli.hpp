#pragma once

#include <string>
#include <vector>

namespace liediff
{

enum ExitCode : int
{
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2
};

/// Parses argv (including the program name) and runs one subcommand.
int dispatch(int argc, const char* const* argv);
int dispatch(const std::vector<std::string>& args);

}  // namespace liediff
