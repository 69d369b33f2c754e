#pragma once

#include <span>
#include <vector>

#include "comex/config.hpp"
#include "comex/world.hpp"

namespace comex {

inline constexpr double kCase1DangerPenalty = -100.0;
inline constexpr double kCase2DangerPenalty = -10.0;
inline constexpr double kSharingBaseWeight = 0.8;
inline constexpr double kIdlePenalty = 1.0;

// Cells discoverable in one step with a square sensing radius.
constexpr int e_max(int radius_cells) { return 4 * radius_cells + 1; }

// Everything a per-agent reward needs about one step.
struct RewardInputs {
  bool dangerous = false;
  bool stationary = false;
  int network_size = 0;       // 0 or 1 means the agent did not share
  int known_before = 0;       // known(M_i^{t-1})
  int known_after = 0;        // known(M_i^t) after sensing
  int known_network = 0;      // known(M_N^t)
  std::vector<int> peer_discoveries;  // q_ij for co-members j
  int area = 0;
  int e_max = 5;

  bool shared() const { return network_size >= 2; }
};

RewardInputs reward_inputs(const AgentStepEvents& ev, int area);

// -100 if dangerous, merge-inclusive gain when sharing, sensing gain otherwise.
double reward_case1(const RewardInputs& in);

double reward_case2(const RewardInputs& in);

// p_i^t: 0.8 plus the mean normalized discovery count toward co-members.
double sharing_weight(const RewardInputs& in);

double agent_reward(RewardCase rc, const RewardInputs& in);

// Arithmetic mean; throws std::invalid_argument on an empty input.
double joint_reward(std::span<const double> per_agent);

struct StepRewards {
  std::vector<double> per_agent;
  double joint = 0.0;
};

StepRewards compute_rewards(RewardCase rc, const StepEvents& events, int area);

}  // namespace comex
