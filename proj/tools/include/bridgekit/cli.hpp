#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bridgekit::cli {

// Runs one bridgekit command line (args excludes the program name). Returns the
// process exit code: 0 on success, 2 on usage errors, 1 on any other failure.
// Failures print a single "error: <category>: <message>" line to err.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_command(int argc, const char* const* argv);

// Oracle suites behind `bridgekit verify`. Prints one row per check and
// returns the number of failed rows.
struct VerifyOptions {
    bool schedule = true;
    bool posterior = true;
    bool sampler = true;
    bool quiet = false;  // print failures and the summary only
};
int run_verify(const VerifyOptions& opts, std::ostream& out);

}  // namespace bridgekit::cli
