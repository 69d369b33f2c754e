#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "comex/config.hpp"
#include "comex/policy.hpp"
#include "comex/reward.hpp"
#include "comex/world.hpp"

namespace comex {

struct TraceStep {
  std::vector<ActionId> actions;
  std::vector<Cell> positions;  // after the step
  StepEvents events;
  StepRewards rewards;
};

// Everything needed to replay an episode: (seed, config) fix the arena and
// spawn, the recorded actions fix the rest.
struct EpisodeTrace {
  std::uint64_t seed = 0;
  EnvConfig config;
  Arena arena;
  std::vector<Cell> initial_positions;
  std::vector<TraceStep> steps;
};

nlohmann::json trace_to_json(const EpisodeTrace& trace);
EpisodeTrace trace_from_json(const nlohmann::json& j);
// Canonical text form; byte equality of two dumps is the determinism check.
std::string dump_trace(const EpisodeTrace& trace);

// Records steps applied to a live world.
class TraceRecorder {
 public:
  TraceRecorder(std::uint64_t seed, const WorldState& initial);
  const TraceStep& record(const WorldState& after, std::span<const ActionId> actions, StepEvents events);
  const EpisodeTrace& trace() const { return trace_; }
  EpisodeTrace take() { return std::move(trace_); }

 private:
  EpisodeTrace trace_;
};

using StepCallback = std::function<void(const WorldState& state, const TraceStep& step)>;

// Runs `n_steps` with one policy per agent. Agent i draws from its own
// stream mix_seed(seed, 100 + i).
EpisodeTrace run_episode(std::span<const std::shared_ptr<const Policy>> policies, const EnvConfig& config,
                         std::uint64_t seed, int n_steps, const StepCallback& on_step = {},
                         const std::function<void(const WorldState&)>& on_reset = {});

std::uint64_t policy_stream_seed(std::uint64_t seed, int agent);

// Re-simulates the recorded actions from (seed, config). Throws
// std::runtime_error if the regenerated arena differs from the recorded one.
EpisodeTrace replay_trace(const EpisodeTrace& trace, const StepCallback& on_step = {},
                          const std::function<void(const WorldState&)>& on_reset = {});

}  // namespace comex
