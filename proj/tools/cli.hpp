#pragma once

#include <ostream>

namespace nlos {

/// Exit codes of the command line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;   ///< runtime failure or a violated gossip assumption
inline constexpr int kExitConfig = 2;    ///< bad arguments or configuration

/// Runs one subcommand (simulate, sweep, relay, validate-gossip, replicate).
/// Reports go to `out`, diagnostics to `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nlos
