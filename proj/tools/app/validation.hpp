#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace helfrich::app {

struct ValidationOptions {
  bool fast = false;
  std::uint64_t seed = 1;
};

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::vector<std::string> details;
  nlohmann::json data = nlohmann::json::object();
  double seconds = 0.0;
};

/// identities, gradients, rescaling, ode_oracle, shrinker, equilibrium.
const std::vector<std::string>& suite_names();

/// Throws ConfigError for an unknown suite name.
SuiteResult run_suite(const std::string& name, const ValidationOptions& options);

}  // namespace helfrich::app
