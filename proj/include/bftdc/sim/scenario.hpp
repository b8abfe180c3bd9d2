#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "bftdc/sim/config.hpp"

namespace bftdc::sim {

// Raised for malformed scenario files; the message names the line and field.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parses and validates a YAML scenario. Unknown fields are rejected.
SimConfig parse_scenario(std::string_view yaml_text);
SimConfig load_scenario(const std::string& path);

}  // namespace bftdc::sim
