// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// if any fails. An optional argument restricts the run to criteria whose key
// contains it.
#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "comex/comms.hpp"
#include "comex/envd.hpp"
#include "comex/eval.hpp"
#include "comex/frontier.hpp"
#include "comex/happo.hpp"
#include "comex/reward.hpp"
#include "comex/serialize.hpp"
#include "comex/trace.hpp"
#include "oracles.hpp"

using namespace comex;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

ReconMap merge(std::initializer_list<const ReconMap*> maps) {
  const std::vector<const ReconMap*> v(maps);
  return merge_maps(std::span<const ReconMap* const>(v)).map;
}

Outcome merge_algebra() {
  const auto start = Clock::now();
  Rng rng(101);
  long failures = 0;
  for (int k = 0; k < 1000; ++k) {
    const Arena a = generate_arena(k, EnvConfig{});
    const ReconMap x = testing::random_consistent_map(a, rng.uniform01(), rng);
    const ReconMap y = testing::random_consistent_map(a, rng.uniform01(), rng);
    const ReconMap z = testing::random_consistent_map(a, rng.uniform01(), rng);
    const ReconMap empty(a.rows(), a.cols());
    const ReconMap xy = merge({&x, &y});
    const ReconMap yz = merge({&y, &z});
    failures += xy != merge({&y, &x});
    failures += merge({&xy, &z}) != merge({&x, &yz});
    failures += merge({&xy, &z}) != merge({&x, &y, &z});
    failures += merge({&x, &x}) != x;
    failures += merge({&x, &empty}) != x;
  }
  const double t = seconds_since(start);
  return {failures == 0 && t < 5.0, fmt::format("{} violations over 1000 pairs/triples, {:.2f} s (limit 5 s)", failures, t)};
}

Outcome astar_oracle() {
  const auto start = Clock::now();
  Rng rng(102);
  long pairs = 0, mismatches = 0;
  for (int k = 0; k < 100; ++k) {
    const Arena a = generate_arena(10'000 + k, EnvConfig{});
    Cell agent;
    const ReconMap m = testing::random_partial_map(a, rng.uniform(0.3, 0.9), rng, &agent);
    const std::vector<int> dist = testing::bfs_distances(m, agent);
    for (const Cell f : detect_frontiers(m)) {
      const auto path = astar(m, agent, f);
      const int expected = dist[m.index(f)];
      ++pairs;
      if (expected < 0 ? path.has_value() : (!path || path->length() != expected)) ++mismatches;
    }
  }
  const double t = seconds_since(start);
  return {mismatches == 0 && pairs > 0 && t < 10.0,
          fmt::format("{} mismatches over {} (agent, frontier) pairs, {:.2f} s (limit 10 s)", mismatches, pairs, t)};
}

Outcome fpr_conservation() {
  Rng rng(103);
  long bad_count = 0, bad_range = 0;
  for (int k = 0; k < 500; ++k) {
    const Arena a = generate_arena(20'000 + k, EnvConfig{});
    Cell agent;
    const ReconMap m = testing::random_partial_map(a, rng.uniform(0.1, 0.95), rng, &agent);
    const auto seen = testing::flood_reachable(m, agent);
    int expected = 0;
    for (const Cell f : testing::frontier_scan(m)) expected += (seen[m.index(f)] && f != agent) ? 1 : 0;
    const FprResult r = fpr_features(m, agent);
    bad_count += r.table.total_count() != expected;
    for (double v : r.normalized) bad_range += (v < 0.0 || v > 1.0);
  }
  return {bad_count == 0 && bad_range == 0,
          fmt::format("{} count mismatches, {} out-of-range features over 500 maps", bad_count, bad_range)};
}

Outcome emax_check() {
  Rng rng(104);
  int steps = 0, diagonal_moves = 0, max_diag = 0, max_any = 0;
  for (std::uint64_t seed = 0; steps < 10'000; ++seed) {
    WorldState s = reset_episode(30'000 + seed, EnvConfig{});
    for (int t = 0; t < 100 && steps < 10'000; ++t, ++steps) {
      std::vector<ActionId> acts;
      for (int i = 0; i < s.n_agents(); ++i) {
        // Bias toward diagonal moves.
        std::vector<double> logits(kNumActions, 0.0);
        for (int d = 1; d < 8; d += 2) logits[d] = 2.0;
        acts.push_back(masked_sample(logits, available_actions(s, i), rng));
      }
      const StepEvents ev = step(s, acts);
      for (const auto& a : ev.agents) {
        max_any = std::max(max_any, a.sensed_gain);
        if (a.move == MoveResult::Moved && is_diagonal(action_direction(a.action))) {
          ++diagonal_moves;
          max_diag = std::max(max_diag, a.sensed_gain);
        }
      }
    }
  }
  const bool pass = e_max(1) == 5 && max_diag <= 5 && max_any <= 5 && diagonal_moves > 0;
  return {pass, fmt::format("e_max(1) = {}; max sensing gain {} over {} diagonal moves, {} over all moves in {} steps",
                            e_max(1), max_diag, diagonal_moves, max_any, steps)};
}

Outcome reward_fixtures() {
  auto in = [](int before, int after, int network, bool stationary, bool dangerous, int size, std::vector<int> q) {
    RewardInputs r;
    r.known_before = before;
    r.known_after = after;
    r.known_network = network;
    r.stationary = stationary;
    r.dangerous = dangerous;
    r.network_size = size;
    r.peer_discoveries = std::move(q);
    r.area = 144;
    r.e_max = 5;
    return r;
  };
  int failures = 0;
  failures += reward_case1(in(10, 10, 10, false, true, 0, {})) != -100.0;
  failures += reward_case1(in(10, 10, 10, true, false, 0, {})) != 0.0;
  failures += reward_case1(in(50, 50, 80, true, false, 2, {3})) != 30.0;
  failures += reward_case2(in(10, 10, 10, false, true, 0, {})) != -10.0;
  failures += reward_case2(in(10, 10, 10, true, false, 0, {})) != -1.0;
  const double sharing = reward_case2(in(50, 50, 80, true, false, 2, {20}));
  const double oracle = (20.0 + 0.8 * 144.0) * 30.0 / (144.0 * 144.0);
  failures += std::abs(sharing - oracle) > 1e-9;
  const std::vector<double> joint{-100, 0, 0, 0};
  failures += joint_reward(joint) != -25.0;
  return {failures == 0, fmt::format("{} fixture mismatches; Case 2 sharing {:.9f} vs {:.9f}", failures, sharing, oracle)};
}

Outcome masked_safety() {
  Rng rng(105);
  int steps = 0, dangerous = 0;
  for (std::uint64_t seed = 0; steps < 10'000; ++seed) {
    WorldState s = reset_episode(40'000 + seed, EnvConfig{});
    for (int t = 0; t < 100 && steps < 10'000; ++t, ++steps) {
      std::vector<ActionId> acts;
      for (int i = 0; i < s.n_agents(); ++i) {
        std::vector<double> logits(kNumActions);
        for (double& v : logits) v = rng.uniform(-3.0, 3.0);
        acts.push_back(masked_sample(logits, available_actions(s, i), rng));
      }
      for (const auto& a : step(s, acts).agents) dangerous += a.dangerous;
    }
  }
  return {dangerous == 0, fmt::format("{} dangerous flags in {} joint steps", dangerous, steps)};
}

nn::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  nn::Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.normal();
  return m;
}

// Relative error of a layer's parameter and input gradients for sum(R .* y).
double layer_error(nn::ParamSet& p, const std::function<nn::Matrix(const nn::ParamSet&)>& forward,
                   const std::function<nn::Matrix(const nn::ParamSet&, const nn::Matrix&, nn::ParamSet&)>& backward,
                   Rng& rng) {
  for (int t = 0; t < p.size(); ++t) p[t] = random_matrix(p[t].rows(), p[t].cols(), rng);
  const nn::Matrix y = forward(p);
  const nn::Matrix r = random_matrix(y.rows(), y.cols(), rng);
  nn::ParamSet g = p.zeros_like();
  g[g.size() - 1] = backward(p, r, g);
  return testing::max_relative_error(p, g, [&] { return r.cwiseProduct(forward(p)).sum(); });
}

Outcome gradients() {
  const auto start = Clock::now();
  Rng rng(106);
  std::vector<std::pair<std::string, double>> errors;

  {
    nn::ParamSet p;
    p.add("w", 5, 7);
    p.add("b", 5, 1);
    p.add("x", 7, 4);
    errors.emplace_back("dense", layer_error(
        p, [](const nn::ParamSet& q) { return nn::dense_forward(q[0], q[1], q[2]); },
        [](const nn::ParamSet& q, const nn::Matrix& r, nn::ParamSet& g) {
          return nn::dense_backward(q[0], q[2], r, g[0], g[1]);
        },
        rng));
  }
  {
    nn::ParamSet p;
    p.add("x", 6, 4);
    errors.emplace_back("relu", layer_error(
        p, [](const nn::ParamSet& q) { return nn::relu_forward(q[0]); },
        [](const nn::ParamSet& q, const nn::Matrix& r, nn::ParamSet&) { return nn::relu_backward(q[0], r); }, rng));
  }
  {
    nn::ParamSet p;
    p.add("gain", 6, 1);
    p.add("shift", 6, 1);
    p.add("x", 6, 4);
    errors.emplace_back("layernorm", layer_error(
        p, [](const nn::ParamSet& q) { return nn::layernorm_forward(q[0], q[1], q[2]); },
        [](const nn::ParamSet& q, const nn::Matrix& r, nn::ParamSet& g) {
          return nn::layernorm_backward(q[0], q[2], r, g[0], g[1]);
        },
        rng));
  }
  {
    const nn::ConvShape shape{2, 3, 3};
    nn::ParamSet p;
    p.add("w", 3, 18);
    p.add("b", 3, 1);
    p.add("x", 18, 4);
    errors.emplace_back("conv", layer_error(
        p, [&](const nn::ParamSet& q) { return nn::conv_forward(shape, q[0], q[1], q[2]); },
        [&](const nn::ParamSet& q, const nn::Matrix& r, nn::ParamSet& g) {
          return nn::conv_backward(shape, q[0], q[2], r, g[0], g[1]);
        },
        rng));
  }

  EnvConfig env;
  env.rows = 6;
  env.cols = 6;
  env.n_agents = 2;
  TrainConfig cfg;
  cfg.steps_per_episode = 5;
  cfg.batch_episodes = 1;
  for (ArchKind kind : {ArchKind::Mlp, ArchKind::Cnn}) {
    cfg.arch = testing::toy_arch(kind, 2);
    std::vector<Network> actors{Network::actor(cfg.arch, rng), Network::actor(cfg.arch, rng)};
    Network critic = Network::critic(cfg.arch, rng);
    const RolloutBuffer buf = collect_rollout(env, actors, critic, cfg, 7);
    testing::jitter(actors[0].params(), 0.1, rng);
    testing::jitter(critic.params(), 0.1, rng);
    std::vector<double> old_lp = buf.log_probs[0];
    for (double& x : old_lp) x += rng.uniform(-0.1, 0.1);
    std::vector<double> w(buf.size());
    for (double& x : w) x = rng.uniform(-1.0, 1.0);
    auto surrogate = [&] {
      return clipped_surrogate(actors[0], buf.observations[0], buf.masks[0], buf.actions[0], old_lp, w, 0.2);
    };
    const SurrogateResult s = surrogate();
    errors.emplace_back(fmt::format("surrogate/{}", to_string(kind)),
                        testing::max_relative_error(actors[0].params(), s.grad, [&] { return surrogate().objective; }));
    std::vector<double> targets(buf.size());
    for (double& x : targets) x = rng.uniform(-2.0, 2.0);
    const CriticLossResult c = critic_loss(critic, buf.joint_observations, targets);
    errors.emplace_back(fmt::format("critic/{}", to_string(kind)),
                        testing::max_relative_error(critic.params(), c.grad, [&] {
                          return critic_loss(critic, buf.joint_observations, targets).loss;
                        }));
  }

  const double t = seconds_since(start);
  double worst = 0.0;
  std::string parts;
  for (const auto& [name, e] : errors) {
    worst = std::max(worst, e);
    parts += fmt::format(" {}={:.1e}", name, e);
  }
  return {worst < 1e-4 && t < 60.0, fmt::format("max relative error {:.2e} (limit 1e-4), {:.2f} s;{}", worst, t, parts)};
}

std::string random_episode_via_server(std::uint64_t seed, int steps) {
  std::atomic<bool> stop{false};
  std::atomic<int> port{0};
  std::thread server([&] { envd::serve("127.0.0.1:0", EnvConfig{}, stop, [&](int p) { port = p; }); });
  while (port == 0) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  std::string dump;
  {
    envd::LineClient client("127.0.0.1", port);
    auto req = [&](const char* type, nlohmann::json payload) {
      return nlohmann::json::parse(client.request(
          nlohmann::json{{"version", envd::kProtocolVersion}, {"id", 0}, {"type", type}, {"payload", payload}}.dump()));
    };
    nlohmann::json reply = req("reset", {{"seed", seed}});
    const int n = reply["payload"]["n_agents"];
    const int mask_offset = static_cast<int>(observation_size(n));
    std::vector<Rng> streams;
    for (int i = 0; i < n; ++i) streams.emplace_back(policy_stream_seed(seed, i));
    const RandomPolicy random;
    for (int t = 0; t < steps; ++t) {
      std::vector<ActionId> actions;
      for (int i = 0; i < n; ++i) {
        Observation o;
        for (int a = 0; a < kNumActions; ++a)
          if (reply["payload"]["observations"][i][mask_offset + a].get<double>() > 0.5) o.mask.set(a);
        actions.push_back(random.act(o, streams[i]));
      }
      reply = req("step", {{"actions", actions}});
    }
    dump = dump_trace(trace_from_json(req("close", {{"trace", true}})["payload"]["trace"]));
  }
  stop = true;
  server.join();
  return dump;
}

Outcome determinism() {
  const std::uint64_t seed = 42;
  auto pipeline = [&](int jobs) {
    std::string out = arena_to_json(generate_arena(seed, EnvConfig{})).dump();
    out += dump_trace(run_episode(make_policies("comm", 4), EnvConfig{}, seed, 300));
    const EvalReport r = run_batch("comm", EnvConfig{}, 8, 300, seed, jobs);
    out += exploration_csv(r) + comm_stats_csv(r) + expansion_csv(r) + r.summary().dump();
    return out;
  };
  const bool pipeline_equal = pipeline(1) == pipeline(4);
  const std::string local = dump_trace(run_episode(make_policies("random", 4), EnvConfig{}, seed, 300));
  const std::string remote_a = random_episode_via_server(seed, 300);
  const std::string remote_b = random_episode_via_server(seed, 300);
  const bool envd_equal = remote_a == remote_b && remote_a == local;
  return {pipeline_equal && envd_equal,
          fmt::format("generate/run/eval repeat identical: {}; envd episode identical to repeat and in-process: {}",
                      pipeline_equal, envd_equal)};
}

Outcome baseline_coverage() {
  const auto start = Clock::now();
  const int jobs = std::max(1u, std::thread::hardware_concurrency());
  const EvalReport r = run_batch("greedy", EnvConfig{}, 200, 300, 0, jobs);
  const double ratio = r.mean_max_ratio_at(300);
  const double t = seconds_since(start);
  return {ratio >= 0.90 && t < 120.0,
          fmt::format("mean max-agent exploration at step 300 = {:.4f} (need >= 0.90), {:.1f} s on {} threads",
                      ratio, t, jobs)};
}

Outcome training_smoke() {
  const auto start = Clock::now();
  EnvConfig env;
  env.rows = 6;
  env.cols = 6;
  env.n_agents = 2;
  env.horizon = 25;
  env.reward_case = RewardCase::Case2;
  TrainConfig cfg;
  cfg.iterations = 500;
  cfg.steps_per_episode = 25;
  cfg.batch_episodes = 8;
  cfg.learning_rate = 0.01;
  cfg.arch.hidden1 = 64;
  cfg.arch.hidden2 = 64;
  const fs::path dir = fs::temp_directory_path() / "comex_acceptance_train";
  fs::remove_all(dir);
  train(env, cfg, 1, dir);

  // Read the metrics back from the recorded curve.
  std::ifstream in(dir / "learning_curve.csv");
  std::string line;
  std::getline(in, line);
  std::vector<double> ret, expl;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::getline(ss, cell, ',');
    ret.push_back(std::stod(cell));
    std::getline(ss, cell, ',');
    expl.push_back(std::stod(cell));
  }
  fs::remove_all(dir);
  if (ret.size() != 500u) return {false, fmt::format("learning curve has {} rows, expected 500", ret.size())};
  const int tail = 25;
  double r_final = 0.0, e_final = 0.0;
  for (int k = 500 - tail; k < 500; ++k) {
    r_final += ret[k] / tail;
    e_final += expl[k] / tail;
  }
  const double r_init = ret.front(), e_init = expl.front();
  const double gain = r_final - r_init;
  const double t = seconds_since(start);
  const bool pass = gain >= 0.5 * std::abs(r_init) && e_final > e_init && t < 900.0;
  return {pass, fmt::format("return {:.3f} -> {:.3f} (gain {:.3f}, need >= {:.3f}); exploration {:.3f} -> {:.3f}; {:.0f} s",
                            r_init, r_final, gain, 0.5 * std::abs(r_init), e_init, e_final, t)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string filter = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"merge-algebra", merge_algebra},
      {"astar-oracle", astar_oracle},
      {"fpr-conservation", fpr_conservation},
      {"emax", emax_check},
      {"reward-fixtures", reward_fixtures},
      {"masked-safety", masked_safety},
      {"gradients", gradients},
      {"determinism", determinism},
      {"baseline-coverage", baseline_coverage},
      {"training-smoke", training_smoke},
  };
  int failed = 0;
  for (const auto& [key, fn] : criteria) {
    if (!filter.empty() && key.find(filter) == std::string::npos) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    fmt::print("{} {}: {}\n", o.pass ? "PASS" : "FAIL", key, o.detail);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
