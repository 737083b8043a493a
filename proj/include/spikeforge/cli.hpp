#pragma once

#include <iosfwd>
#include <json.hpp>
#include <string>
#include <vector>

namespace spikeforge::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalFailure = 3 };

// Applies "a.b.c=value" to `doc`. The value is parsed as JSON when possible
// and kept as a string otherwise; numeric path segments index arrays.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spikeforge::cli
