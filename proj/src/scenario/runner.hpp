#pragma once

#include <string>

#include "report.hpp"

namespace qig::scenario {

inline constexpr const char* kEngineVersion = "0.1.0";

struct RunOptions {
  int workers = 1;
  bool timing = false;
};

/// Parses the config text and runs one scenario. `scenario` must match the
/// config's own "scenario" field when that is present.
Report run_scenario(const std::string& scenario, const std::string& config_text, const RunOptions& options);

/// Optional "output_path" of the config, empty when absent. ConfigInvalid on a malformed config.
std::string config_output_path(const std::string& config_text);

}  // namespace qig::scenario
