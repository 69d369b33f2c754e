#include "comex/reward.hpp"

#include <stdexcept>

namespace comex {

RewardInputs reward_inputs(const AgentStepEvents& ev, int area) {
  RewardInputs in;
  in.dangerous = ev.dangerous;
  in.stationary = ev.stationary;
  in.network_size = ev.network_size;
  in.known_before = ev.known_before;
  in.known_after = ev.known_after_sense;
  in.known_network = ev.known_after;
  in.peer_discoveries = ev.peer_discoveries;
  in.area = area;
  in.e_max = e_max(kSensingRadiusCells);
  return in;
}

double reward_case1(const RewardInputs& in) {
  if (in.dangerous) return kCase1DangerPenalty;
  if (in.shared()) return in.known_network - in.known_before;
  return in.known_after - in.known_before;
}

double sharing_weight(const RewardInputs& in) {
  if (!in.shared() || in.peer_discoveries.empty()) return kSharingBaseWeight;
  double sum = 0.0;
  for (int q : in.peer_discoveries) sum += static_cast<double>(q) / in.area;
  return sum / static_cast<double>(in.network_size - 1) + kSharingBaseWeight;
}

double reward_case2(const RewardInputs& in) {
  if (in.dangerous) return kCase2DangerPenalty;
  if (in.shared()) {
    return sharing_weight(in) * static_cast<double>(in.known_network - in.known_before) / in.area;
  }
  const double idle = in.stationary ? kIdlePenalty : 0.0;
  return static_cast<double>(in.known_after - in.known_before) / in.e_max - idle;
}

double agent_reward(RewardCase rc, const RewardInputs& in) {
  return rc == RewardCase::Case1 ? reward_case1(in) : reward_case2(in);
}

double joint_reward(std::span<const double> per_agent) {
  if (per_agent.empty()) throw std::invalid_argument("joint_reward: no agents");
  double sum = 0.0;
  for (double r : per_agent) sum += r;
  return sum / static_cast<double>(per_agent.size());
}

StepRewards compute_rewards(RewardCase rc, const StepEvents& events, int area) {
  StepRewards out;
  out.per_agent.reserve(events.agents.size());
  for (const auto& ev : events.agents) out.per_agent.push_back(agent_reward(rc, reward_inputs(ev, area)));
  out.joint = joint_reward(out.per_agent);
  return out;
}

}  // namespace comex
