#include "comex/happo.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "comex/checkpoint.hpp"
#include "comex/eval.hpp"
#include "comex/obsmap.hpp"
#include "comex/reward.hpp"
#include "comex/trace.hpp"
#include "comex/world.hpp"

namespace comex {

using nn::Matrix;

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (steps_per_episode < 1) throw ConfigError("steps_per_episode must be >= 1");
  if (batch_episodes < 1) throw ConfigError("batch_episodes must be >= 1");
  if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("clip must lie in (0, 1)");
  if (ppo_epochs < 1) throw ConfigError("ppo_epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in (0, 1]");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json arch = to_json(c.arch);
  arch.erase("n_agents");
  return {{"iterations", c.iterations},       {"steps_per_episode", c.steps_per_episode},
          {"batch_episodes", c.batch_episodes}, {"clip", c.clip},
          {"ppo_epochs", c.ppo_epochs},       {"learning_rate", c.learning_rate},
          {"gamma", c.gamma},                 {"lambda", c.lambda},
          {"arch", std::move(arch)},          {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  static const std::set<std::string> known = {"iterations", "steps_per_episode", "batch_episodes", "clip",
                                              "ppo_epochs", "learning_rate",     "gamma",          "lambda",
                                              "arch",       "checkpoint_every"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown training field '" + key + "'");
  }
  try {
    base.iterations = j.value("iterations", base.iterations);
    base.steps_per_episode = j.value("steps_per_episode", base.steps_per_episode);
    base.batch_episodes = j.value("batch_episodes", base.batch_episodes);
    base.clip = j.value("clip", base.clip);
    base.ppo_epochs = j.value("ppo_epochs", base.ppo_epochs);
    base.learning_rate = j.value("learning_rate", base.learning_rate);
    base.gamma = j.value("gamma", base.gamma);
    base.lambda = j.value("lambda", base.lambda);
    base.checkpoint_every = j.value("checkpoint_every", base.checkpoint_every);
    if (j.contains("arch")) {
      nlohmann::json arch = to_json(base.arch);
      arch.update(j.at("arch"));
      base.arch = arch_spec_from_json(arch);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return base;
}

RolloutBuffer collect_rollout(const EnvConfig& env, std::span<const Network> actors, const Network& critic,
                              const TrainConfig& config, std::uint64_t seed,
                              std::span<const std::shared_ptr<const Policy>> scripted) {
  const int n = env.n_agents;
  if (static_cast<int>(actors.size()) != n) throw std::invalid_argument("collect_rollout: need one actor per agent");
  if (!scripted.empty() && static_cast<int>(scripted.size()) != n)
    throw std::invalid_argument("collect_rollout: need one scripted policy per agent");
  const int obs_size = static_cast<int>(observation_size(n));
  if (critic.input_size() != n * obs_size) throw std::invalid_argument("collect_rollout: critic input size mismatch");

  RolloutBuffer buf;
  buf.n_agents = n;
  buf.episodes = config.batch_episodes;
  buf.steps = config.steps_per_episode;
  const int total = buf.episodes * buf.steps;
  buf.observations.assign(n, Matrix(obs_size, total));
  buf.masks.assign(n, std::vector<ActionMask>(total));
  buf.actions.assign(n, std::vector<ActionId>(total));
  buf.log_probs.assign(n, std::vector<double>(total));
  buf.joint_observations.resize(n * obs_size, total);
  buf.rewards.assign(total, 0.0);
  buf.episode_end.assign(total, 0);

  std::vector<ActionId> actions(n);
  std::vector<double> features;
  for (int e = 0; e < buf.episodes; ++e) {
    const std::uint64_t episode_seed = mix_seed(seed, static_cast<std::uint64_t>(e));
    WorldState state = reset_episode(episode_seed, env);
    std::vector<Rng> streams;
    for (int i = 0; i < n; ++i) streams.emplace_back(policy_stream_seed(episode_seed, i));

    double episode_return = 0.0;
    for (int t = 0; t < buf.steps; ++t) {
      const int k = e * buf.steps + t;
      for (int i = 0; i < n; ++i) {
        const Observation obs = build_observation(state, i);
        features.clear();
        obs.append_features(features);
        const Eigen::Map<const Eigen::VectorXd> column(features.data(), obs_size);
        buf.observations[i].col(k) = column;
        buf.joint_observations.block(i * obs_size, k, obs_size, 1) = column;
        buf.masks[i][k] = obs.mask;

        const Matrix logits = actors[i].forward(Matrix(column));
        const ActionDistribution dist =
            masked_distribution(std::span<const double>(logits.data(), kNumActions), obs.mask);
        actions[i] = scripted.empty() ? sample(dist, streams[i]) : scripted[i]->act(obs, streams[i]);
        buf.actions[i][k] = actions[i];
        buf.log_probs[i][k] = dist.log_probs[actions[i]];
      }
      const StepEvents events = step(state, actions);
      const StepRewards rewards = compute_rewards(env.reward_case, events, env.area());
      buf.rewards[k] = rewards.joint;
      episode_return += rewards.joint;
    }
    buf.episode_end[e * buf.steps + buf.steps - 1] = 1;
    buf.episode_returns.push_back(episode_return);
    buf.final_exploration.push_back(exploration_ratio(state).max);
  }

  const Matrix values = critic.forward(buf.joint_observations);
  buf.values.assign(values.data(), values.data() + total);
  return buf;
}

std::vector<double> generalized_advantages(std::span<const double> rewards, std::span<const double> values,
                                           std::span<const std::uint8_t> episode_end, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || episode_end.size() != n)
    throw std::invalid_argument("generalized_advantages: length mismatch");
  std::vector<double> adv(n);
  double next_value = 0.0;
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    if (episode_end[k]) {
      next_value = 0.0;
      next_adv = 0.0;
    }
    const double delta = rewards[k] + gamma * next_value - values[k];
    adv[k] = delta + gamma * lambda * next_adv;
    next_adv = adv[k];
    next_value = values[k];
  }
  return adv;
}

Advantages compute_advantages(const RolloutBuffer& buffer, double gamma, double lambda) {
  Advantages out;
  out.raw = generalized_advantages(buffer.rewards, buffer.values, buffer.episode_end, gamma, lambda);
  const std::size_t n = out.raw.size();
  out.returns.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.returns[k] = out.raw[k] + buffer.values[k];

  double mean = 0.0;
  for (double a : out.raw) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double a : out.raw) var += (a - mean) * (a - mean);
  const double stddev = std::sqrt(var / static_cast<double>(n));
  out.normalized.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.normalized[k] = (out.raw[k] - mean) / (stddev + 1e-8);
  return out;
}

namespace {

std::vector<bool> mask_bits(const ActionMask& m) {
  std::vector<bool> bits(kNumActions);
  for (int a = 0; a < kNumActions; ++a) bits[a] = m.test(a);
  return bits;
}

}  // namespace

std::vector<double> action_log_probs(const Network& actor, const Matrix& observations,
                                     std::span<const ActionMask> masks, std::span<const ActionId> actions) {
  const Matrix logits = actor.forward(observations);
  std::vector<double> out(observations.cols());
  for (Eigen::Index k = 0; k < observations.cols(); ++k) {
    out[k] = nn::masked_log_softmax(logits.col(k), mask_bits(masks[k]))[actions[k]];
  }
  return out;
}

SurrogateResult clipped_surrogate(const Network& actor, const Matrix& observations, std::span<const ActionMask> masks,
                                  std::span<const ActionId> actions, std::span<const double> old_log_probs,
                                  std::span<const double> weights, double clip) {
  const Eigen::Index n = observations.cols();
  Network::Tape tape;
  const Matrix logits = actor.forward(observations, tape);
  Matrix grad_logits = Matrix::Zero(logits.rows(), n);
  SurrogateResult out;
  for (Eigen::Index k = 0; k < n; ++k) {
    const nn::Vector lp = nn::masked_log_softmax(logits.col(k), mask_bits(masks[k]));
    const double ratio = std::exp(lp[actions[k]] - old_log_probs[k]);
    const double m = weights[k];
    const double unclipped = ratio * m;
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * m;
    out.objective += std::min(unclipped, clipped);
    if (unclipped <= clipped) grad_logits.col(k) = (m * ratio / static_cast<double>(n)) * nn::log_prob_grad(lp, actions[k]);
  }
  out.objective /= static_cast<double>(n);
  out.grad = actor.params().zeros_like();
  actor.backward(tape, grad_logits, out.grad);
  return out;
}

CriticLossResult critic_loss(const Network& critic, const Matrix& joint_observations, std::span<const double> targets) {
  const Eigen::Index n = joint_observations.cols();
  Network::Tape tape;
  const Matrix values = critic.forward(joint_observations, tape);
  Matrix grad = Matrix::Zero(1, n);
  CriticLossResult out;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double err = values(0, k) - targets[k];
    out.loss += err * err;
    grad(0, k) = 2.0 * err / static_cast<double>(n);
  }
  out.loss /= static_cast<double>(n);
  out.grad = critic.params().zeros_like();
  critic.backward(tape, grad, out.grad);
  return out;
}

ActorUpdateDiagnostics update_actors_sequential(std::span<Network> actors, const RolloutBuffer& buffer,
                                                std::span<const double> advantages, const TrainConfig& config,
                                                Rng& order_rng) {
  const int n = static_cast<int>(actors.size());
  ActorUpdateDiagnostics diag;
  diag.order.resize(n);
  std::iota(diag.order.begin(), diag.order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(order_rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
    std::swap(diag.order[i], diag.order[j]);
  }
  diag.objective_before.assign(n, 0.0);
  diag.objective_after.assign(n, 0.0);

  std::vector<double> weights(advantages.begin(), advantages.end());
  for (int agent : diag.order) {
    Network& actor = actors[agent];
    const auto& obs = buffer.observations[agent];
    const auto& masks = buffer.masks[agent];
    const auto& acts = buffer.actions[agent];
    const auto& old_lp = buffer.log_probs[agent];

    for (int epoch = 0; epoch < config.ppo_epochs; ++epoch) {
      SurrogateResult res = clipped_surrogate(actor, obs, masks, acts, old_lp, weights, config.clip);
      if (!std::isfinite(res.objective) || !res.grad.all_finite())
        throw TrainingError(fmt::format("non-finite surrogate for agent {} at epoch {}", agent, epoch));
      if (epoch == 0) diag.objective_before[agent] = res.objective;
      actor.params().axpy(config.learning_rate, res.grad);
    }

    const std::vector<double> new_lp = action_log_probs(actor, obs, masks, acts);
    double objective = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const double ratio = std::exp(new_lp[k] - old_lp[k]);
      objective += std::min(ratio * weights[k],
                            std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip) * weights[k]);
      weights[k] *= ratio;
    }
    diag.objective_after[agent] = objective / static_cast<double>(weights.size());
    if (!std::isfinite(diag.objective_after[agent]))
      throw TrainingError(fmt::format("non-finite surrogate for agent {} after update", agent));
  }
  return diag;
}

CriticUpdateDiagnostics update_critic(Network& critic, const RolloutBuffer& buffer, std::span<const double> returns,
                                      const TrainConfig& config) {
  CriticUpdateDiagnostics diag;
  for (int epoch = 0; epoch < config.ppo_epochs; ++epoch) {
    CriticLossResult res = critic_loss(critic, buffer.joint_observations, returns);
    if (!std::isfinite(res.loss) || !res.grad.all_finite())
      throw TrainingError(fmt::format("non-finite critic loss at epoch {}", epoch));
    if (epoch == 0) diag.loss_before = res.loss;
    critic.params().axpy(-config.learning_rate, res.grad);
  }
  diag.loss_after = critic_loss(critic, buffer.joint_observations, returns).loss;
  if (!std::isfinite(diag.loss_after)) throw TrainingError("non-finite critic loss after update");
  return diag;
}

std::string learning_curve_header(int n_agents) {
  std::string h = "iteration,mean_return,exploration_ratio";
  for (int i = 0; i < n_agents; ++i) h += fmt::format(",actor_loss_{}", i);
  return h + ",critic_loss\n";
}

std::string learning_curve_row(const IterationRecord& r) {
  std::string row = fmt::format("{},{},{}", r.iteration, r.mean_return, r.exploration);
  for (double l : r.actor_loss) row += fmt::format(",{}", l);
  return row + fmt::format(",{}\n", r.critic_loss);
}

namespace {

std::vector<NamedNetwork> checkpoint_contents(const std::vector<Network>& actors, const Network& critic) {
  std::vector<NamedNetwork> out;
  for (std::size_t i = 0; i < actors.size(); ++i) out.push_back({"actor_" + std::to_string(i), actors[i]});
  out.push_back({"critic", critic});
  return out;
}

}  // namespace

TrainResult train(const EnvConfig& env, const TrainConfig& config, std::uint64_t seed,
                  const std::filesystem::path& out_dir,
                  const std::function<void(const IterationRecord&)>& on_iteration) {
  env.validate();
  config.validate();
  TrainConfig cfg = config;
  cfg.arch.n_agents = env.n_agents;

  TrainResult result;
  Rng init_rng(mix_seed(seed, 7));
  for (int i = 0; i < env.n_agents; ++i) result.actors.push_back(Network::actor(cfg.arch, init_rng));
  result.critic = Network::critic(cfg.arch, init_rng);
  Rng order_rng(mix_seed(seed, 8));

  const bool persist = !out_dir.empty();
  std::ofstream curve_file;
  auto save = [&](const std::string& file) {
    const auto path = out_dir / file;
    save_checkpoint(path, checkpoint_contents(result.actors, result.critic));
    result.checkpoints.push_back(path);
  };
  if (persist) {
    std::filesystem::create_directories(out_dir);
    save("checkpoint_init.bin");
    curve_file.open(out_dir / "learning_curve.csv", std::ios::binary | std::ios::trunc);
    if (!curve_file) throw std::runtime_error("cannot write learning curve in " + out_dir.string());
    curve_file << learning_curve_header(env.n_agents) << std::flush;
  }

  for (int it = 1; it <= cfg.iterations; ++it) {
    const RolloutBuffer buffer = collect_rollout(env, result.actors, result.critic, cfg,
                                                 mix_seed(seed, 10'000 + static_cast<std::uint64_t>(it)));
    const Advantages adv = compute_advantages(buffer, cfg.gamma, cfg.lambda);
    const ActorUpdateDiagnostics actor_diag =
        update_actors_sequential(result.actors, buffer, adv.normalized, cfg, order_rng);
    const CriticUpdateDiagnostics critic_diag = update_critic(result.critic, buffer, adv.returns, cfg);

    IterationRecord rec;
    rec.iteration = it;
    rec.mean_return = std::accumulate(buffer.episode_returns.begin(), buffer.episode_returns.end(), 0.0) /
                      static_cast<double>(buffer.episode_returns.size());
    rec.exploration = std::accumulate(buffer.final_exploration.begin(), buffer.final_exploration.end(), 0.0) /
                      static_cast<double>(buffer.final_exploration.size());
    for (double obj : actor_diag.objective_after) rec.actor_loss.push_back(-obj);
    rec.critic_loss = critic_diag.loss_after;
    result.curve.push_back(rec);

    if (persist) {
      curve_file << learning_curve_row(rec) << std::flush;
      if (cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0 && it != cfg.iterations)
        save(fmt::format("checkpoint_{}.bin", it));
    }
    if (on_iteration) on_iteration(rec);
  }
  if (persist) save("checkpoint_final.bin");
  return result;
}

}  // namespace comex
