#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "otdebias/docsbook/corpus.hpp"

namespace otdebias::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (without the program name). Reports go to `out`, diagnostics to `err`.
/// Returns 0 on success, 1 on a data or I/O error, 2 on a usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Adds the "run_cli" operation to a docsbook registry. Inputs: "argv" (strings, "{dir}" is
/// replaced by a scratch directory) and "files" (name -> contents written there first).
/// Outputs: exit_code, stdout, json (when stdout parses as JSON) and csv_rows otherwise.
void register_cli_handler(docsbook::Registry& registry);

/// default_registry() plus run_cli.
docsbook::Registry full_registry();

}  // namespace otdebias::cli
