#include "comex/eval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "comex/comms.hpp"
#include "comex/reward.hpp"
#include "comex/serialize.hpp"

namespace comex {

ExplorationRatios exploration_ratio(const WorldState& state) {
  ExplorationRatios out;
  const double area = state.config.area();
  for (const auto& m : state.maps) {
    out.per_agent.push_back(m.known_count() / area);
    out.max = std::max(out.max, out.per_agent.back());
  }
  if (!state.maps.empty()) out.union_ratio = merge_maps(std::span<const ReconMap>(state.maps)).map.known_count() / area;
  return out;
}

CommStats communication_stats(const EpisodeTrace& trace) {
  CommStats s;
  for (const auto& st : trace.steps) {
    for (const auto& ev : st.events.agents) {
      ++s.total_actions;
      if (ev.action != kCommunicate) continue;
      ++s.communicate_actions;
      if (ev.merge_gain > 0) ++s.successful;
    }
  }
  s.action_ratio = s.total_actions > 0 ? static_cast<double>(s.communicate_actions) / s.total_actions : 0.0;
  s.success_ratio = s.communicate_actions > 0 ? static_cast<double>(s.successful) / s.communicate_actions : 0.0;
  return s;
}

void ExpansionHistogram::add(const EpisodeTrace& trace) {
  for (const auto& st : trace.steps) {
    for (const auto& net : st.events.networks) {
      for (int gain : net.gains) {
        if (gain > 0) ++counts[gain];
      }
    }
  }
}

long ExpansionHistogram::total() const {
  long n = 0;
  for (const auto& [gain, count] : counts) n += count;
  return n;
}

long ExpansionHistogram::above_threshold() const {
  long n = 0;
  for (const auto& [gain, count] : counts) {
    if (gain > e_max_threshold) n += count;
  }
  return n;
}

ExpansionHistogram expansion_histogram(std::span<const EpisodeTrace> traces) {
  ExpansionHistogram h;
  h.e_max_threshold = e_max(kSensingRadiusCells);
  for (const auto& t : traces) h.add(t);
  return h;
}

std::uint64_t run_seed(std::uint64_t batch_seed, int run) {
  return mix_seed(batch_seed, 1000 + static_cast<std::uint64_t>(run));
}

namespace {

void record_ratios(RunRecord& rec, const WorldState& state) {
  const ExplorationRatios r = exploration_ratio(state);
  rec.agent_ratio.push_back(r.per_agent);
  rec.max_ratio.push_back(r.max);
  rec.union_ratio.push_back(r.union_ratio);
}

void finish_record(RunRecord& rec, const EpisodeTrace& trace) {
  rec.seed = trace.seed;
  rec.comm = communication_stats(trace);
  rec.expansions.e_max_threshold = e_max(kSensingRadiusCells);
  rec.expansions.add(trace);
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= xs.size();
  double sq = 0.0;
  for (double x : xs) sq += (x - out.mean) * (x - out.mean);
  out.stddev = std::sqrt(sq / xs.size());
  return out;
}

nlohmann::json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.stddev}}; }

}  // namespace

RunRecord evaluate_trace(const EpisodeTrace& trace, int run) {
  RunRecord rec;
  rec.run = run;
  replay_trace(trace, [&](const WorldState& state, const TraceStep&) { record_ratios(rec, state); });
  finish_record(rec, trace);
  return rec;
}

EvalReport run_batch(std::span<const std::shared_ptr<const Policy>> policies, const EnvConfig& config,
                     int n_runs, int n_steps, std::uint64_t seed, int jobs) {
  if (n_runs < 1 || n_steps < 1) throw std::invalid_argument("run_batch: n_runs and n_steps must be >= 1");
  config.validate();
  EvalReport report;
  report.n_runs = n_runs;
  report.n_steps = n_steps;
  report.seed = seed;
  report.config = config;
  report.runs.resize(n_runs);

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < n_runs; r = next++) {
      RunRecord rec;
      rec.run = r;
      const EpisodeTrace trace = run_episode(policies, config, run_seed(seed, r), n_steps,
                                             [&](const WorldState& state, const TraceStep&) { record_ratios(rec, state); });
      finish_record(rec, trace);
      report.runs[r] = std::move(rec);
    }
  };
  const int threads = std::clamp(jobs, 1, n_runs);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  report.expansions.e_max_threshold = e_max(kSensingRadiusCells);
  for (const auto& rec : report.runs) {
    for (const auto& [gain, count] : rec.expansions.counts) report.expansions.counts[gain] += count;
  }
  return report;
}

EvalReport run_batch(const std::string& policy_spec, const EnvConfig& config, int n_runs, int n_steps,
                     std::uint64_t seed, int jobs) {
  const auto policies = make_policies(policy_spec, config.n_agents);
  EvalReport report = run_batch(std::span<const std::shared_ptr<const Policy>>(policies), config, n_runs, n_steps, seed, jobs);
  report.policy = policy_spec;
  return report;
}

double EvalReport::mean_final_max_ratio() const { return mean_max_ratio_at(n_steps); }

double EvalReport::mean_max_ratio_at(int step) const {
  if (runs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : runs) sum += r.max_ratio.at(step - 1);
  return sum / runs.size();
}

nlohmann::json EvalReport::summary() const {
  std::vector<double> final_max, final_union, action, success;
  for (const auto& r : runs) {
    final_max.push_back(r.max_ratio.back());
    final_union.push_back(r.union_ratio.back());
    action.push_back(r.comm.action_ratio);
    success.push_back(r.comm.success_ratio);
  }
  nlohmann::json by_step_mean = nlohmann::json::array();
  nlohmann::json by_step_std = nlohmann::json::array();
  for (int s = 0; s < n_steps; ++s) {
    std::vector<double> xs;
    for (const auto& r : runs) xs.push_back(r.max_ratio[s]);
    const MeanStd m = mean_std(xs);
    by_step_mean.push_back(m.mean);
    by_step_std.push_back(m.stddev);
  }
  return {{"format", "comex.eval_summary"},
          {"version", kFormatVersion},
          {"policy", policy},
          {"seed", seed},
          {"n_runs", n_runs},
          {"n_steps", n_steps},
          {"config", to_json(config)},
          {"final_max_ratio", to_json(mean_std(final_max))},
          {"final_union_ratio", to_json(mean_std(final_union))},
          {"max_ratio_by_step", {{"mean", by_step_mean}, {"std", by_step_std}}},
          {"comm_action_ratio", to_json(mean_std(action))},
          {"comm_success_ratio", to_json(mean_std(success))},
          {"expansions",
           {{"samples", expansions.total()},
            {"e_max_threshold", expansions.e_max_threshold},
            {"above_threshold", expansions.above_threshold()}}}};
}

std::string exploration_csv(const EvalReport& report) {
  std::string out = "run,step,agent,ratio,max_ratio,union_ratio\n";
  for (const auto& r : report.runs) {
    for (std::size_t s = 0; s < r.agent_ratio.size(); ++s) {
      for (std::size_t a = 0; a < r.agent_ratio[s].size(); ++a) {
        out += fmt::format("{},{},{},{},{},{}\n", r.run, s + 1, a, r.agent_ratio[s][a], r.max_ratio[s], r.union_ratio[s]);
      }
    }
  }
  return out;
}

std::string comm_stats_csv(const EvalReport& report) {
  std::string out = "run,action_ratio,success_ratio\n";
  for (const auto& r : report.runs) out += fmt::format("{},{},{}\n", r.run, r.comm.action_ratio, r.comm.success_ratio);
  return out;
}

std::string expansion_csv(const EvalReport& report) {
  std::string out = "gain,count\n";
  for (const auto& [gain, count] : report.expansions.counts) out += fmt::format("{},{}\n", gain, count);
  return out;
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "exploration_curves.csv", exploration_csv(report));
  write_text_file(dir / "comm_stats.csv", comm_stats_csv(report));
  write_text_file(dir / "expansion_hist.csv", expansion_csv(report));
  write_text_file(dir / "summary.json", report.summary().dump(2) + "\n");
}

}  // namespace comex
