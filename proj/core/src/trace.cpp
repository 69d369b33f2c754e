#include "comex/trace.hpp"

#include <stdexcept>

#include "comex/obsmap.hpp"
#include "comex/serialize.hpp"

namespace comex {

namespace {

nlohmann::json cells_to_json(const std::vector<Cell>& cells) {
  nlohmann::json out = nlohmann::json::array();
  for (const Cell c : cells) out.push_back({c.row, c.col});
  return out;
}

std::vector<Cell> cells_from_json(const nlohmann::json& j) {
  std::vector<Cell> out;
  for (const auto& c : j) out.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
  return out;
}

MoveResult move_result_from_string(const std::string& s) {
  for (auto r : {MoveResult::NotAMove, MoveResult::Moved, MoveResult::OffGrid, MoveResult::StaticObstacle,
                 MoveResult::OccupiedCell, MoveResult::Swap, MoveResult::DiagonalSqueeze, MoveResult::Yielded}) {
    if (s == to_string(r)) return r;
  }
  throw std::runtime_error("unknown move result '" + s + "'");
}

}  // namespace

nlohmann::json trace_to_json(const EpisodeTrace& trace) {
  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const TraceStep& s = trace.steps[k];
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& ev : s.events.agents) {
      agents.push_back({{"move", to_string(ev.move)},
                        {"dangerous", ev.dangerous},
                        {"stationary", ev.stationary},
                        {"sensed_gain", ev.sensed_gain},
                        {"merge_gain", ev.merge_gain},
                        {"network", ev.network},
                        {"network_size", ev.network_size},
                        {"known_before", ev.known_before},
                        {"known_after_sense", ev.known_after_sense},
                        {"known_after", ev.known_after},
                        {"peer_discoveries", ev.peer_discoveries}});
    }
    nlohmann::json networks = nlohmann::json::array();
    for (const auto& net : s.events.networks) {
      networks.push_back({{"members", net.members},
                          {"gains", net.gains},
                          {"known_after", net.known_after},
                          {"conflicts", net.conflicts}});
    }
    steps.push_back({{"t", k + 1},
                     {"actions", s.actions},
                     {"positions", cells_to_json(s.positions)},
                     {"agents", std::move(agents)},
                     {"networks", std::move(networks)},
                     {"rewards", s.rewards.per_agent},
                     {"joint_reward", s.rewards.joint}});
  }
  return {{"format", "comex.trace"},
          {"version", kFormatVersion},
          {"seed", trace.seed},
          {"config", to_json(trace.config)},
          {"arena", arena_to_json(trace.arena)},
          {"initial_positions", cells_to_json(trace.initial_positions)},
          {"steps", std::move(steps)}};
}

EpisodeTrace trace_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", std::string()) != "comex.trace")
    throw ParseError("expected a 'comex.trace' document", 0);
  if (j.value("version", 0) != kFormatVersion) throw ParseError("unsupported trace version", 0);
  try {
    EpisodeTrace trace;
    trace.seed = j.at("seed").get<std::uint64_t>();
    trace.config = env_config_from_json(j.at("config"));
    trace.arena = arena_from_json(j.at("arena"));
    trace.initial_positions = cells_from_json(j.at("initial_positions"));
    for (const auto& js : j.at("steps")) {
      TraceStep s;
      s.actions = js.at("actions").get<std::vector<ActionId>>();
      s.positions = cells_from_json(js.at("positions"));
      for (const auto& ja : js.at("agents")) {
        AgentStepEvents ev;
        ev.move = move_result_from_string(ja.at("move").get<std::string>());
        ev.dangerous = ja.at("dangerous").get<bool>();
        ev.stationary = ja.at("stationary").get<bool>();
        ev.sensed_gain = ja.at("sensed_gain").get<int>();
        ev.merge_gain = ja.at("merge_gain").get<int>();
        ev.network = ja.at("network").get<int>();
        ev.network_size = ja.at("network_size").get<int>();
        ev.known_before = ja.at("known_before").get<int>();
        ev.known_after_sense = ja.at("known_after_sense").get<int>();
        ev.known_after = ja.at("known_after").get<int>();
        ev.peer_discoveries = ja.at("peer_discoveries").get<std::vector<int>>();
        s.events.agents.push_back(std::move(ev));
      }
      for (std::size_t i = 0; i < s.events.agents.size() && i < s.actions.size(); ++i)
        s.events.agents[i].action = s.actions[i];
      for (const auto& jn : js.at("networks")) {
        s.events.networks.push_back({jn.at("members").get<std::vector<int>>(), jn.at("gains").get<std::vector<int>>(),
                                     jn.at("known_after").get<int>(), jn.at("conflicts").get<int>()});
      }
      s.rewards.per_agent = js.at("rewards").get<std::vector<double>>();
      s.rewards.joint = js.at("joint_reward").get<double>();
      trace.steps.push_back(std::move(s));
    }
    return trace;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("trace: ") + e.what(), 0);
  }
}

std::string dump_trace(const EpisodeTrace& trace) { return trace_to_json(trace).dump() + "\n"; }

TraceRecorder::TraceRecorder(std::uint64_t seed, const WorldState& initial) {
  trace_.seed = seed;
  trace_.config = initial.config;
  trace_.arena = initial.arena;
  trace_.initial_positions = initial.positions;
}

const TraceStep& TraceRecorder::record(const WorldState& after, std::span<const ActionId> actions,
                                       StepEvents events) {
  TraceStep s;
  s.actions.assign(actions.begin(), actions.end());
  s.positions = after.positions;
  s.rewards = compute_rewards(after.config.reward_case, events, after.config.area());
  s.events = std::move(events);
  trace_.steps.push_back(std::move(s));
  return trace_.steps.back();
}

std::uint64_t policy_stream_seed(std::uint64_t seed, int agent) {
  return mix_seed(seed, 100 + static_cast<std::uint64_t>(agent));
}

EpisodeTrace run_episode(std::span<const std::shared_ptr<const Policy>> policies, const EnvConfig& config,
                         std::uint64_t seed, int n_steps, const StepCallback& on_step,
                         const std::function<void(const WorldState&)>& on_reset) {
  if (static_cast<int>(policies.size()) != config.n_agents)
    throw std::invalid_argument("run_episode: need one policy per agent");
  WorldState state = reset_episode(seed, config);
  if (on_reset) on_reset(state);
  TraceRecorder recorder(seed, state);
  std::vector<Rng> streams;
  for (int i = 0; i < config.n_agents; ++i) streams.emplace_back(policy_stream_seed(seed, i));

  std::vector<ActionId> actions(config.n_agents);
  for (int k = 0; k < n_steps; ++k) {
    for (int i = 0; i < config.n_agents; ++i) actions[i] = policies[i]->act(build_observation(state, i), streams[i]);
    StepEvents events = step(state, actions);
    const TraceStep& recorded = recorder.record(state, actions, std::move(events));
    if (on_step) on_step(state, recorded);
  }
  return recorder.take();
}

EpisodeTrace replay_trace(const EpisodeTrace& trace, const StepCallback& on_step,
                          const std::function<void(const WorldState&)>& on_reset) {
  WorldState state = reset_episode(trace.seed, trace.config);
  if (!(state.arena == trace.arena)) throw std::runtime_error("replay: regenerated arena differs from trace");
  if (on_reset) on_reset(state);
  TraceRecorder recorder(trace.seed, state);
  for (const TraceStep& s : trace.steps) {
    StepEvents events = step(state, s.actions);
    const TraceStep& recorded = recorder.record(state, s.actions, std::move(events));
    if (on_step) on_step(state, recorded);
  }
  return recorder.take();
}

}  // namespace comex
