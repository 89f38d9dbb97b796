#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace motifidx::gateway {

/// Runs one command line (args exclude the program name). Exports go to
/// `out` or --out; failures print {"error": {...}} to `err` and return nonzero.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace motifidx::gateway
