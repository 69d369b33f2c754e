#include "comex/config.hpp"

#include <cmath>
#include <set>
#include <string>

namespace comex {

int EnvConfig::obstacle_count() const {
  // The small epsilon keeps ratios such as 0.29 * 100 from flooring to 28.
  return static_cast<int>(std::floor(obstacle_ratio * area() + 1e-9));
}

void EnvConfig::validate() const {
  if (rows < 1 || cols < 1) throw ConfigError("rows and cols must be >= 1");
  if (!(obstacle_ratio >= 0.0 && obstacle_ratio < 1.0))
    throw ConfigError("obstacle_ratio must lie in [0, 1)");
  if (!(cell_side > 0.0)) throw ConfigError("cell_side must be > 0");
  if (!(detection_range > 0.0)) throw ConfigError("detection_range must be > 0");
  if (!(comm_range >= detection_range))
    throw ConfigError("comm_range must be >= detection_range");
  if (n_agents < 1) throw ConfigError("n_agents must be >= 1");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (reward_case != RewardCase::Case1 && reward_case != RewardCase::Case2)
    throw ConfigError("reward_case must be 1 or 2");
  if (obstacle_count() >= area() - n_agents)
    throw ConfigError("too many obstacles: floor(ratio*rows*cols) must be < rows*cols - n_agents");
}

nlohmann::json to_json(const EnvConfig& c) {
  return {
      {"rows", c.rows},
      {"cols", c.cols},
      {"obstacle_ratio", c.obstacle_ratio},
      {"cell_side", c.cell_side},
      {"detection_range", c.detection_range},
      {"comm_range", c.comm_range},
      {"n_agents", c.n_agents},
      {"horizon", c.horizon},
      {"reward_case", static_cast<int>(c.reward_case)},
      {"diagonal_through_free", c.diagonal_through_free},
  };
}

EnvConfig env_config_from_json(const nlohmann::json& j, EnvConfig base) {
  if (!j.is_object()) throw ConfigError("environment config must be a JSON object");
  static const std::set<std::string> known = {
      "rows",       "cols",     "obstacle_ratio", "cell_side",   "detection_range",
      "comm_range", "n_agents", "horizon",        "reward_case", "diagonal_through_free"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown environment field '" + key + "'");
  }
  try {
    if (j.contains("rows")) base.rows = j.at("rows").get<int>();
    if (j.contains("cols")) base.cols = j.at("cols").get<int>();
    if (j.contains("obstacle_ratio")) base.obstacle_ratio = j.at("obstacle_ratio").get<double>();
    if (j.contains("cell_side")) base.cell_side = j.at("cell_side").get<double>();
    if (j.contains("detection_range")) base.detection_range = j.at("detection_range").get<double>();
    if (j.contains("comm_range")) base.comm_range = j.at("comm_range").get<double>();
    if (j.contains("n_agents")) base.n_agents = j.at("n_agents").get<int>();
    if (j.contains("horizon")) base.horizon = j.at("horizon").get<int>();
    if (j.contains("reward_case")) {
      const int rc = j.at("reward_case").get<int>();
      if (rc != 1 && rc != 2) throw ConfigError("reward_case must be 1 or 2");
      base.reward_case = static_cast<RewardCase>(rc);
    }
    if (j.contains("diagonal_through_free"))
      base.diagonal_through_free = j.at("diagonal_through_free").get<bool>();
  } catch (const nlohmann::json::type_error& e) {
    throw ConfigError(std::string("environment config: ") + e.what());
  }
  return base;
}

}  // namespace comex
