#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "comex/policy.hpp"
#include "comex/trace.hpp"
#include "comex/world.hpp"

namespace comex {

struct ExplorationRatios {
  std::vector<double> per_agent;  // known(M_i) / (rows * cols)
  double max = 0.0;
  double union_ratio = 0.0;       // ratio of the union of all agents' maps
};

ExplorationRatios exploration_ratio(const WorldState& state);

struct CommStats {
  int total_actions = 0;
  int communicate_actions = 0;
  int successful = 0;  // communicate actions whose agent's map grew by merging
  double action_ratio = 0.0;
  double success_ratio = 0.0;

  friend bool operator==(const CommStats&, const CommStats&) = default;
};

CommStats communication_stats(const EpisodeTrace& trace);

// One sample per (merge event, member) with a positive gain, bin width 1.
struct ExpansionHistogram {
  std::map<int, long> counts;
  int e_max_threshold = 5;

  void add(const EpisodeTrace& trace);
  long total() const;
  long above_threshold() const;
  friend bool operator==(const ExpansionHistogram&, const ExpansionHistogram&) = default;
};

ExpansionHistogram expansion_histogram(std::span<const EpisodeTrace> traces);

struct RunRecord {
  int run = 0;
  std::uint64_t seed = 0;
  // Indexed [step][agent]; step 0 is the state after the first action.
  std::vector<std::vector<double>> agent_ratio;
  std::vector<double> max_ratio;
  std::vector<double> union_ratio;
  CommStats comm;
  ExpansionHistogram expansions;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct EvalReport {
  int n_runs = 0;
  int n_steps = 0;
  std::uint64_t seed = 0;
  std::string policy;
  EnvConfig config;
  std::vector<RunRecord> runs;
  ExpansionHistogram expansions;

  double mean_final_max_ratio() const;
  double mean_max_ratio_at(int step) const;  // step counted from 1
  nlohmann::json summary() const;
};

std::uint64_t run_seed(std::uint64_t batch_seed, int run);

// Builds a run's metrics by replaying its trace.
RunRecord evaluate_trace(const EpisodeTrace& trace, int run);

// Runs `n_runs` independent episodes on up to `jobs` threads. Run r uses
// run_seed(seed, r); the report does not depend on `jobs`.
EvalReport run_batch(const std::string& policy_spec, const EnvConfig& config, int n_runs, int n_steps,
                     std::uint64_t seed, int jobs = 1);

EvalReport run_batch(std::span<const std::shared_ptr<const Policy>> policies, const EnvConfig& config,
                     int n_runs, int n_steps, std::uint64_t seed, int jobs = 1);

// exploration_curves.csv, comm_stats.csv, expansion_hist.csv, summary.json.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

std::string exploration_csv(const EvalReport& report);
std::string comm_stats_csv(const EvalReport& report);
std::string expansion_csv(const EvalReport& report);

}  // namespace comex
