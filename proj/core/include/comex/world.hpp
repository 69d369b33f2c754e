#pragma once

#include <bitset>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "comex/config.hpp"
#include "comex/grid.hpp"
#include "comex/types.hpp"

namespace comex {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ActionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kMaxArenaAttempts = 10'000;

// Obstacles are placed uniformly at random, rejecting layouts whose free space
// is not 8-connected.
Arena generate_arena(std::uint64_t seed, const EnvConfig& config);

struct WorldState {
  EnvConfig config;
  Arena arena;
  std::vector<Cell> positions;
  std::vector<ReconMap> maps;
  // discoveries[i * n + j]: cells agent i added to its map since it last
  // shared a network with agent j.
  std::vector<int> discoveries;
  int t = 0;

  int n_agents() const { return static_cast<int>(positions.size()); }
  int& discovery(int i, int j) { return discoveries[i * n_agents() + j]; }
  int discovery(int i, int j) const { return discoveries[i * n_agents() + j]; }
  std::optional<int> agent_at(Cell c) const;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

// Samples distinct free cells and performs each agent's initial sense.
WorldState spawn_agents(std::uint64_t seed, const Arena& arena, const EnvConfig& config);

// Arena and spawn drawn from independent child streams of `seed`.
WorldState reset_episode(std::uint64_t seed, const EnvConfig& config);

enum class MoveResult : std::uint8_t {
  NotAMove,        // stay or communicate
  Moved,
  OffGrid,         // dangerous
  StaticObstacle,  // dangerous
  OccupiedCell,    // dangerous: target holds an agent that does not leave
  Swap,            // dangerous: two agents exchanging cells
  DiagonalSqueeze, // dangerous: both side cells blocked (diagonal_through_free)
  Yielded,         // lost a same-target conflict to a lower index; not dangerous
};

constexpr bool is_dangerous(MoveResult r) {
  return r == MoveResult::OffGrid || r == MoveResult::StaticObstacle ||
         r == MoveResult::OccupiedCell || r == MoveResult::Swap ||
         r == MoveResult::DiagonalSqueeze;
}

const char* to_string(MoveResult r);

struct AgentStepEvents {
  ActionId action = kStay;
  MoveResult move = MoveResult::NotAMove;
  bool dangerous = false;
  bool stationary = true;  // position unchanged this step
  int sensed_gain = 0;
  int merge_gain = 0;
  int network = -1;        // index into StepEvents::networks, -1 if none
  int network_size = 0;    // 0 when the agent did not communicate
  int known_before = 0;
  int known_after_sense = 0;
  int known_after = 0;
  // q_ij for every co-member j, captured before the counters reset.
  std::vector<int> peer_discoveries;

  friend bool operator==(const AgentStepEvents&, const AgentStepEvents&) = default;
};

struct NetworkEvent {
  std::vector<int> members;  // ascending agent indices
  std::vector<int> gains;    // aligned with members
  int known_after = 0;
  int conflicts = 0;

  friend bool operator==(const NetworkEvent&, const NetworkEvent&) = default;
};

struct StepEvents {
  std::vector<AgentStepEvents> agents;
  std::vector<NetworkEvent> networks;

  friend bool operator==(const StepEvents&, const StepEvents&) = default;
};

// Movement resolution only (phase 1 and 2 of a step). Exposed for testing.
std::vector<MoveResult> resolve_moves(const WorldState& state, std::span<const ActionId> actions);

// Advances the world by one joint action. Throws ActionError on a malformed
// action vector, leaving the state untouched.
StepEvents step(WorldState& state, std::span<const ActionId> actions);

using ActionMask = std::bitset<kNumActions>;

ActionMask available_actions(const WorldState& state, int agent);

}  // namespace comex
