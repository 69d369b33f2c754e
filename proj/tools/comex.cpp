// comex: arena generation, episode runs, batch evaluation, training, map
// analysis, trace replay and the envd server.
#include <CLI11.hpp>
#include <fmt/format.h>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include "comex/checkpoint.hpp"
#include "comex/envd.hpp"
#include "comex/eval.hpp"
#include "comex/frontier.hpp"
#include "comex/happo.hpp"
#include "comex/serialize.hpp"
#include "comex/trace.hpp"
#include "comex/world.hpp"

namespace fs = std::filesystem;
using namespace comex;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_file;
  std::uint64_t seed = 0;
  std::string out;
  std::optional<int> steps;
  int runs = 200;
  int jobs = 0;
  std::optional<int> reward_case;
  std::string policy = "greedy";
  std::optional<int> iterations;
  std::string input;
  std::string position;
};

struct ResolvedConfig {
  EnvConfig env;
  TrainConfig train;
};

// A config file holds optional "env" and "train" sections.
ResolvedConfig resolve_config(const Options& o) {
  ResolvedConfig rc;
  if (!o.config_file.empty()) {
    const nlohmann::json j = parse_json_text(read_text_file(o.config_file));
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key != "env" && key != "train") throw ConfigError("unknown config section '" + key + "'");
    }
    if (j.contains("env")) rc.env = env_config_from_json(j["env"]);
    if (j.contains("train")) rc.train = train_config_from_json(j["train"]);
  }
  if (o.reward_case) rc.env.reward_case = *o.reward_case == 1 ? RewardCase::Case1 : RewardCase::Case2;
  if (o.iterations) rc.train.iterations = *o.iterations;
  rc.env.validate();
  rc.train.validate();
  return rc;
}

fs::path output_dir(const Options& o, const char* fallback) {
  const fs::path dir = o.out.empty() ? fs::path(fallback) : fs::path(o.out);
  fs::create_directories(dir);
  return dir;
}

void write_manifest(const fs::path& dir, const std::string& subcommand, const Options& o,
                    const ResolvedConfig& rc, nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json m = {{"format", "comex.manifest"},
                      {"version", kFormatVersion},
                      {"subcommand", subcommand},
                      {"config_file", o.config_file},
                      {"seed", o.seed},
                      {"out", dir.string()},
                      {"env", to_json(rc.env)}};
  for (auto& [key, value] : extra.items()) m[key] = value;
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

int cmd_generate(const Options& o) {
  const ResolvedConfig rc = resolve_config(o);
  const Arena arena = generate_arena(o.seed, rc.env);
  const fs::path dir = output_dir(o, "out/generate");
  write_text_file(dir / "arena.json", arena_to_json(arena).dump() + "\n");
  write_manifest(dir, "generate", o, rc);
  fmt::print("arena {}x{}: {} obstacles, free space {}\n", arena.rows(), arena.cols(), arena.occupied_count(),
             arena.free_space_connected() ? "8-connected" : "DISCONNECTED");
  fmt::print("wrote {}\n", (dir / "arena.json").string());
  return kExitOk;
}

int cmd_run(const Options& o) {
  const ResolvedConfig rc = resolve_config(o);
  const int steps = o.steps.value_or(rc.env.horizon);
  if (steps < 1) throw UsageError("--steps must be >= 1");
  const auto policies = make_policies(o.policy, rc.env.n_agents);
  const fs::path dir = output_dir(o, "out/run");

  std::string metrics = "step,agent,ratio,max_ratio,union_ratio,reward,joint_reward\n";
  const EpisodeTrace trace = run_episode(policies, rc.env, o.seed, steps, [&](const WorldState& s, const TraceStep& st) {
    const ExplorationRatios r = exploration_ratio(s);
    for (int i = 0; i < rc.env.n_agents; ++i)
      metrics += fmt::format("{},{},{},{},{},{},{}\n", s.t, i, r.per_agent[i], r.max, r.union_ratio,
                             st.rewards.per_agent[i], st.rewards.joint);
  });
  write_text_file(dir / "trace.json", dump_trace(trace));
  write_text_file(dir / "metrics.csv", metrics);
  write_manifest(dir, "run", o, rc, {{"policy", o.policy}, {"steps", steps}});

  const RunRecord rec = evaluate_trace(trace, 0);
  fmt::print("{} steps, final max exploration ratio {:.4f} (union {:.4f}), communicate ratio {:.4f}\n", steps,
             rec.max_ratio.back(), rec.union_ratio.back(), rec.comm.action_ratio);
  return kExitOk;
}

int cmd_eval(const Options& o) {
  const ResolvedConfig rc = resolve_config(o);
  const int steps = o.steps.value_or(rc.env.horizon);
  if (steps < 1 || o.runs < 1) throw UsageError("--steps and --runs must be >= 1");
  const int jobs = o.jobs > 0 ? o.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const EvalReport report = run_batch(o.policy, rc.env, o.runs, steps, o.seed, jobs);
  const fs::path dir = output_dir(o, "out/eval");
  write_report(report, dir);
  write_manifest(dir, "eval", o, rc, {{"policy", o.policy}, {"runs", o.runs}, {"steps", steps}});
  const nlohmann::json s = report.summary();
  fmt::print("{} runs x {} steps: final max exploration {:.4f} +/- {:.4f}, communicate ratio {:.4f}\n", o.runs, steps,
             s["final_max_ratio"]["mean"].get<double>(), s["final_max_ratio"]["std"].get<double>(),
             s["comm_action_ratio"]["mean"].get<double>());
  return kExitOk;
}

int cmd_train(const Options& o) {
  ResolvedConfig rc = resolve_config(o);
  if (o.steps) rc.train.steps_per_episode = *o.steps;
  rc.train.validate();
  const fs::path dir = output_dir(o, "out/train");
  write_manifest(dir, "train", o, rc, {{"train", to_json(rc.train)}});
  const int every = std::max(1, rc.train.iterations / 50);
  const TrainResult result = train(rc.env, rc.train, o.seed, dir, [&](const IterationRecord& r) {
    if (r.iteration == 1 || r.iteration % every == 0 || r.iteration == rc.train.iterations)
      fmt::print("iter {:>5}  return {:>10.4f}  exploration {:.4f}  critic {:.5f}\n", r.iteration, r.mean_return,
                 r.exploration, r.critic_loss);
  });
  fmt::print("wrote {} checkpoints and learning_curve.csv to {}\n", result.checkpoints.size(), dir.string());
  return kExitOk;
}

Cell parse_position(const std::string& text) {
  int row = 0, col = 0;
  char comma = 0;
  std::istringstream in(text);
  if (!(in >> row >> comma >> col) || comma != ',' || !in.eof()) throw UsageError("--at expects ROW,COL");
  return {row, col};
}

int cmd_analyze(const Options& o) {
  const ReconMap map = load_map_file(o.input);
  const Cell at = parse_position(o.position);
  if (!map.in_bounds(at)) throw UsageError(fmt::format("position ({},{}) is outside the map", at.row, at.col));
  const FprResult r = fpr_features(map, at);
  if (r.frontiers.empty()) {
    fmt::print("no frontiers\n");
    return kExitOk;
  }
  fmt::print("frontiers ({}, {} reachable):", r.frontiers.size(), r.reachable);
  for (const Cell c : r.frontiers) fmt::print(" ({},{})", c.row, c.col);
  fmt::print("\n{:<4} {:>5} {:>9} {:>9}\n", "dir", "n", "mean", "std");
  for (int d = 0; d < kNumDirections; ++d) {
    const DirectionStats& s = r.table.directions[d];
    fmt::print("{:<4} {:>5} {:>9.4f} {:>9.4f}\n", kDirectionName[d], s.count, s.mean, s.stddev);
  }
  fmt::print("normalized:");
  for (double v : r.normalized) fmt::print(" {:.6g}", v);
  fmt::print("\n");
  return kExitOk;
}

int cmd_replay(const Options& o) {
  const EpisodeTrace trace = trace_from_json(parse_json_text(read_text_file(o.input)));
  const EpisodeTrace again = replay_trace(trace);
  const bool identical = dump_trace(again) == dump_trace(trace);
  const RunRecord rec = evaluate_trace(trace, 0);
  if (!o.out.empty()) {
    const fs::path dir = output_dir(o, "out/replay");
    EvalReport report;
    report.n_runs = 1;
    report.n_steps = static_cast<int>(trace.steps.size());
    report.seed = trace.seed;
    report.policy = "replay";
    report.config = trace.config;
    report.runs = {rec};
    report.expansions = rec.expansions;
    if (report.n_steps > 0) write_report(report, dir);
    ResolvedConfig rc{trace.config, {}};
    Options echo = o;
    echo.seed = trace.seed;
    write_manifest(dir, "replay", echo, rc, {{"trace", o.input}});
  }
  fmt::print("{} steps replayed, trace {}\n", trace.steps.size(), identical ? "identical" : "DIFFERS");
  if (!rec.max_ratio.empty()) fmt::print("final max exploration ratio {:.4f}\n", rec.max_ratio.back());
  return identical ? kExitOk : kExitRuntime;
}

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

int cmd_serve(const Options& o, const std::string& address) {
  const ResolvedConfig rc = resolve_config(o);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  envd::serve(address, rc.env, g_stop, [&](int port) {
    fmt::print("envd listening on port {} (protocol version {})\n", port, envd::kProtocolVersion);
    std::fflush(stdout);
  });
  return kExitOk;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_file, "JSON config with optional 'env' and 'train' sections")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Root seed");
  cmd->add_option("--reward-case", o.reward_case, "Reward function")->check(CLI::IsMember({1, 2}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"comex: multi-agent exploration simulator and trainer"};
  app.require_subcommand(0, 1);
  Options o;
  std::string serve_address;
  app.add_option("--serve", serve_address, "Run the envd server on HOST:PORT");
  add_common(&app, o);

  auto* generate = app.add_subcommand("generate", "Generate an arena");
  add_common(generate, o);
  generate->add_option("--out", o.out, "Output directory");

  auto* run = app.add_subcommand("run", "Run one episode and write its trace");
  add_common(run, o);
  run->add_option("--out", o.out, "Output directory");
  run->add_option("--steps", o.steps, "Episode length (default: horizon)");
  run->add_option("--policy", o.policy, "greedy|greedy-count|comm|random|stay|<checkpoint>, comma-separated per agent");

  auto* eval = app.add_subcommand("eval", "Evaluate policies over many random arenas");
  add_common(eval, o);
  eval->add_option("--out", o.out, "Output directory");
  eval->add_option("--steps", o.steps, "Steps per run (default: horizon)");
  eval->add_option("--runs", o.runs, "Number of arenas");
  eval->add_option("--jobs", o.jobs, "Worker threads (default: all cores)");
  eval->add_option("--policy", o.policy, "greedy|greedy-count|comm|random|stay|<checkpoint>, comma-separated per agent");

  auto* trainer = app.add_subcommand("train", "Train actors and critic");
  add_common(trainer, o);
  trainer->add_option("--out", o.out, "Output directory");
  trainer->add_option("--steps", o.steps, "Steps per training episode");
  trainer->add_option("--iterations", o.iterations, "Training iterations");

  auto* analyze = app.add_subcommand("analyze", "Print frontier reachability features of a map");
  analyze->add_option("map", o.input, "Map or arena file")->required()->check(CLI::ExistingFile);
  analyze->add_option("--at", o.position, "Agent position ROW,COL")->required();

  auto* replay = app.add_subcommand("replay", "Replay a trace and check it reproduces");
  replay->add_option("trace", o.input, "Trace file")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", o.out, "Write metrics of the replayed run here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (!serve_address.empty()) {
      if (!app.get_subcommands().empty()) throw UsageError("--serve cannot be combined with a subcommand");
      return cmd_serve(o, serve_address);
    }
    if (*generate) return cmd_generate(o);
    if (*run) return cmd_run(o);
    if (*eval) return cmd_eval(o);
    if (*trainer) return cmd_train(o);
    if (*analyze) return cmd_analyze(o);
    if (*replay) return cmd_replay(o);
    std::cerr << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitRuntime;
  } catch (const UnknownPolicyError& e) {
    fmt::print(stderr, "policy error: {}\n", e.what());
    return kExitRuntime;
  } catch (const ParseError& e) {
    fmt::print(stderr, "parse error: {}\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
}
