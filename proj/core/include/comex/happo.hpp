#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "comex/config.hpp"
#include "comex/network.hpp"
#include "comex/policy.hpp"

namespace comex {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int iterations = 5000;        // n_e
  int steps_per_episode = 200;  // n_s
  int batch_episodes = 8;       // n_b
  double clip = 0.2;            // epsilon
  int ppo_epochs = 5;
  double learning_rate = 5e-4;  // actors and critic
  double gamma = 0.99;
  double lambda = 0.95;
  ArchSpec arch;                // n_agents is overwritten from the environment
  int checkpoint_every = 0;     // 0: initial and final checkpoints only

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

// Samples are indexed k = episode * steps + t.
struct RolloutBuffer {
  int n_agents = 0;
  int episodes = 0;
  int steps = 0;
  std::vector<nn::Matrix> observations;     // per agent: obs_size x N
  std::vector<std::vector<ActionMask>> masks;
  std::vector<std::vector<ActionId>> actions;
  std::vector<std::vector<double>> log_probs;
  nn::Matrix joint_observations;            // (n_agents * obs_size) x N
  std::vector<double> rewards;              // joint reward
  std::vector<double> values;               // critic estimate of each joint observation
  std::vector<std::uint8_t> episode_end;    // 1 on the last step of an episode
  std::vector<double> episode_returns;      // undiscounted, one per episode
  std::vector<double> final_exploration;    // max-agent ratio at episode end

  int size() const { return static_cast<int>(rewards.size()); }
};

// Episodes end at `steps_per_episode` and are treated as terminal. When
// `scripted` is non-empty those policies choose the actions and the actors
// only score them.
RolloutBuffer collect_rollout(const EnvConfig& env, std::span<const Network> actors, const Network& critic,
                              const TrainConfig& config, std::uint64_t seed,
                              std::span<const std::shared_ptr<const Policy>> scripted = {});

struct Advantages {
  std::vector<double> raw;         // GAE before normalization
  std::vector<double> normalized;  // zero mean, unit variance over the batch
  std::vector<double> returns;     // raw + value
};

std::vector<double> generalized_advantages(std::span<const double> rewards, std::span<const double> values,
                                           std::span<const std::uint8_t> episode_end, double gamma, double lambda);

Advantages compute_advantages(const RolloutBuffer& buffer, double gamma, double lambda);

std::vector<double> action_log_probs(const Network& actor, const nn::Matrix& observations,
                                     std::span<const ActionMask> masks, std::span<const ActionId> actions);

struct SurrogateResult {
  double objective = 0.0;  // mean of min(ratio * M, clip(ratio) * M)
  nn::ParamSet grad;       // gradient of the objective
};

SurrogateResult clipped_surrogate(const Network& actor, const nn::Matrix& observations,
                                  std::span<const ActionMask> masks, std::span<const ActionId> actions,
                                  std::span<const double> old_log_probs, std::span<const double> weights,
                                  double clip);

struct CriticLossResult {
  double loss = 0.0;  // mean squared error
  nn::ParamSet grad;
};

CriticLossResult critic_loss(const Network& critic, const nn::Matrix& joint_observations,
                             std::span<const double> targets);

struct ActorUpdateDiagnostics {
  std::vector<int> order;
  std::vector<double> objective_before;  // per agent index, at the first epoch
  std::vector<double> objective_after;   // per agent index, after the last epoch
};

// Updates the actors one at a time in a freshly shuffled order. Each agent
// optimizes the clipped surrogate on the running weights M, which are then
// multiplied by that agent's new/old probability ratio for the next agent.
ActorUpdateDiagnostics update_actors_sequential(std::span<Network> actors, const RolloutBuffer& buffer,
                                                std::span<const double> advantages, const TrainConfig& config,
                                                Rng& order_rng);

struct CriticUpdateDiagnostics {
  double loss_before = 0.0;
  double loss_after = 0.0;
};

CriticUpdateDiagnostics update_critic(Network& critic, const RolloutBuffer& buffer, std::span<const double> returns,
                                      const TrainConfig& config);

struct IterationRecord {
  int iteration = 0;
  double mean_return = 0.0;
  double exploration = 0.0;
  std::vector<double> actor_loss;  // negated surrogate objective per agent
  double critic_loss = 0.0;
};

struct TrainResult {
  std::vector<IterationRecord> curve;
  std::vector<Network> actors;
  Network critic = Network::zeros(ArchSpec{}, NetRole::Critic);
  std::vector<std::filesystem::path> checkpoints;
};

std::string learning_curve_header(int n_agents);
std::string learning_curve_row(const IterationRecord& r);

// With a non-empty `out_dir`, writes checkpoint_init.bin, checkpoint_final.bin,
// periodic checkpoint_<iter>.bin and an append-only learning_curve.csv.
TrainResult train(const EnvConfig& env, const TrainConfig& config, std::uint64_t seed,
                  const std::filesystem::path& out_dir = {},
                  const std::function<void(const IterationRecord&)>& on_iteration = {});

}  // namespace comex
