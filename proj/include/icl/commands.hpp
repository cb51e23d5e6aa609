#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "icl/config.hpp"

namespace icl {

const std::vector<std::string>& subcommands();

// Runs one subcommand. Results go to config.out, tables to config.reports.
// Returns 0 iff every item succeeded; failures are summarised on `err`.
int run_command(const std::string& name, const RunConfig& config, std::ostream& out,
                std::ostream& err);

}  // namespace icl
