#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dvfsflow {

// Exit codes returned by run_cli.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitData = 4,  // unreadable/malformed files, too little data
  kExitOther = 5,
};

/// `args` excludes the program name. Subcommands: run, gen, eval, report, selftest.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace dvfsflow
