#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "comex/network.hpp"
#include "comex/obsmap.hpp"
#include "comex/rng.hpp"
#include "comex/world.hpp"

namespace comex {

struct ActionDistribution {
  std::array<double, kNumActions> probs{};
  std::array<double, kNumActions> log_probs{};  // -inf where masked
};

// Softmax over the available actions only. Throws std::invalid_argument if
// the mask is empty.
ActionDistribution masked_distribution(std::span<const double> logits, const ActionMask& mask);

ActionId sample(const ActionDistribution& dist, Rng& rng);

ActionId masked_sample(std::span<const double> logits, const ActionMask& mask, Rng& rng);

nn::Matrix actor_forward(const Network& actor, const Observation& obs);

// Decentralized policy interface: one agent, its own observation.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual ActionId act(const Observation& obs, Rng& rng) const = 0;
  virtual std::string name() const = 0;
};

class NetworkPolicy final : public Policy {
 public:
  explicit NetworkPolicy(Network actor, std::string label = "network");
  ActionId act(const Observation& obs, Rng& rng) const override;
  std::string name() const override { return label_; }
  const Network& actor() const { return actor_; }

 private:
  Network actor_;
  std::string label_;
};

// Uniform over available actions.
class RandomPolicy final : public Policy {
 public:
  ActionId act(const Observation& obs, Rng& rng) const override;
  std::string name() const override { return "random"; }
};

class StayPolicy final : public Policy {
 public:
  ActionId act(const Observation&, Rng&) const override { return kStay; }
  std::string name() const override { return "stay"; }
};

// Moves toward the available direction whose frontiers are closest on average
// (more frontiers breaks ties, then direction order). Random available move
// when no direction has a frontier. Never communicates.
ActionId baseline_greedy_frontier(const Observation& obs, Rng& rng);

// Same, but ranks by frontier count first and mean length second. Tends to
// oscillate between two cells once frontiers lie behind the agent.
ActionId baseline_greedy_count(const Observation& obs, Rng& rng);

// Communicates with probability 1/2 when another agent is in range,
// otherwise acts greedily.
ActionId baseline_comm_on_contact(const Observation& obs, Rng& rng);

class GreedyFrontierPolicy final : public Policy {
 public:
  ActionId act(const Observation& obs, Rng& rng) const override { return baseline_greedy_frontier(obs, rng); }
  std::string name() const override { return "greedy"; }
};

class GreedyCountPolicy final : public Policy {
 public:
  ActionId act(const Observation& obs, Rng& rng) const override { return baseline_greedy_count(obs, rng); }
  std::string name() const override { return "greedy-count"; }
};

class CommOnContactPolicy final : public Policy {
 public:
  ActionId act(const Observation& obs, Rng& rng) const override { return baseline_comm_on_contact(obs, rng); }
  std::string name() const override { return "comm"; }
};

struct UnknownPolicyError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Resolves a comma-separated list of policy names or checkpoint paths into
// one policy per agent. A single entry applies to every agent. Checkpoints
// supply actor_<i> for agent i (or their only actor).
std::vector<std::shared_ptr<const Policy>> make_policies(const std::string& spec, int n_agents);

}  // namespace comex
