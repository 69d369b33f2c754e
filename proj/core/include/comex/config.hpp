#pragma once

#include <nlohmann/json.hpp>

#include "comex/types.hpp"

namespace comex {

enum class RewardCase { Case1 = 1, Case2 = 2 };

// Environment parameters. Defaults reproduce the 12x12 training arena.
struct EnvConfig {
  int rows = 12;
  int cols = 12;
  double obstacle_ratio = 0.1;
  double cell_side = 0.5;        // meters
  double detection_range = 1.1;  // meters; sensing itself is fixed to 3x3
  double comm_range = 3.2;       // meters
  int n_agents = 4;
  int horizon = 300;
  RewardCase reward_case = RewardCase::Case2;
  bool diagonal_through_free = false;

  int area() const { return rows * cols; }
  int obstacle_count() const;

  // Throws ConfigError describing the first violated constraint.
  void validate() const;

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

nlohmann::json to_json(const EnvConfig& c);

// Fields absent from `j` keep the values already in `base`; unknown keys are
// rejected so typos do not silently fall back to defaults.
EnvConfig env_config_from_json(const nlohmann::json& j, EnvConfig base = {});

}  // namespace comex
