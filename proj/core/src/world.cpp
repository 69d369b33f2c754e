#include "comex/world.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "comex/comms.hpp"
#include "comex/obsmap.hpp"
#include "comex/rng.hpp"

namespace comex {

namespace {

// Partial Fisher-Yates: the first `k` entries of `items` become a uniform sample.
template <typename T>
void sample_prefix(std::vector<T>& items, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(items.size() - i);
    std::swap(items[i], items[j]);
  }
}

}  // namespace

Arena generate_arena(std::uint64_t seed, const EnvConfig& config) {
  config.validate();
  Rng rng(seed);
  const int count = config.obstacle_count();
  std::vector<int> cells(config.area());
  for (int attempt = 0; attempt < kMaxArenaAttempts; ++attempt) {
    std::iota(cells.begin(), cells.end(), 0);
    sample_prefix(cells, static_cast<std::size_t>(count), rng);
    Arena arena(config.rows, config.cols, config.cell_side, config.obstacle_ratio);
    for (int k = 0; k < count; ++k) arena.set_occupied(arena.cell_at(cells[k]), true);
    if (arena.free_space_connected()) return arena;
  }
  throw GenerationError("could not generate an arena with connected free space after " +
                        std::to_string(kMaxArenaAttempts) + " attempts");
}

std::optional<int> WorldState::agent_at(Cell c) const {
  for (int i = 0; i < n_agents(); ++i) {
    if (positions[i] == c) return i;
  }
  return std::nullopt;
}

WorldState spawn_agents(std::uint64_t seed, const Arena& arena, const EnvConfig& config) {
  std::vector<Cell> free = arena.free_cells();
  if (static_cast<int>(free.size()) < config.n_agents)
    throw GenerationError("not enough free cells to place every agent");
  Rng rng(seed);
  sample_prefix(free, static_cast<std::size_t>(config.n_agents), rng);

  WorldState state;
  state.config = config;
  state.arena = arena;
  state.positions.assign(free.begin(), free.begin() + config.n_agents);
  state.maps.assign(config.n_agents, ReconMap(arena.rows(), arena.cols()));
  state.discoveries.assign(static_cast<std::size_t>(config.n_agents) * config.n_agents, 0);
  for (int i = 0; i < config.n_agents; ++i) {
    update_map(state.maps[i], sense_fov(state.arena, state.positions, i));
  }
  return state;
}

WorldState reset_episode(std::uint64_t seed, const EnvConfig& config) {
  const Arena arena = generate_arena(mix_seed(seed, 1), config);
  return spawn_agents(mix_seed(seed, 2), arena, config);
}

const char* to_string(MoveResult r) {
  switch (r) {
    case MoveResult::NotAMove: return "none";
    case MoveResult::Moved: return "moved";
    case MoveResult::OffGrid: return "off_grid";
    case MoveResult::StaticObstacle: return "static_obstacle";
    case MoveResult::OccupiedCell: return "occupied_cell";
    case MoveResult::Swap: return "swap";
    case MoveResult::DiagonalSqueeze: return "diagonal_squeeze";
    case MoveResult::Yielded: return "yielded";
  }
  return "?";
}

namespace {

bool squeezed(const Arena& arena, Cell from, Direction d) {
  const Cell dd = delta(d);
  return arena.blocked(from + Cell{dd.row, 0}) && arena.blocked(from + Cell{0, dd.col});
}

void check_actions(const WorldState& state, std::span<const ActionId> actions) {
  if (static_cast<int>(actions.size()) != state.n_agents())
    throw ActionError("expected " + std::to_string(state.n_agents()) + " actions, got " +
                      std::to_string(actions.size()));
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (!is_valid_action(actions[i]))
      throw ActionError("action " + std::to_string(actions[i]) + " for agent " +
                        std::to_string(i) + " is outside [0, 9]");
  }
}

}  // namespace

std::vector<MoveResult> resolve_moves(const WorldState& state, std::span<const ActionId> actions) {
  check_actions(state, actions);
  const int n = state.n_agents();
  const Arena& arena = state.arena;
  std::vector<MoveResult> result(n, MoveResult::NotAMove);
  std::vector<Cell> target(state.positions);

  for (int i = 0; i < n; ++i) {
    if (!is_move(actions[i])) continue;
    const Direction d = action_direction(actions[i]);
    target[i] = state.positions[i] + delta(d);
    if (!arena.in_bounds(target[i])) {
      result[i] = MoveResult::OffGrid;
    } else if (arena.occupied(target[i])) {
      result[i] = MoveResult::StaticObstacle;
    } else if (state.config.diagonal_through_free && is_diagonal(d) &&
               squeezed(arena, state.positions[i], d)) {
      result[i] = MoveResult::DiagonalSqueeze;
    } else {
      result[i] = MoveResult::Moved;
    }
  }

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (result[i] == MoveResult::Moved && result[j] == MoveResult::Moved &&
          target[i] == state.positions[j] && target[j] == state.positions[i]) {
        result[i] = result[j] = MoveResult::Swap;
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    if (result[i] != MoveResult::Moved) continue;
    for (int j = 0; j < i; ++j) {
      if (result[j] == MoveResult::Moved && target[j] == target[i]) {
        result[i] = MoveResult::Yielded;
        break;
      }
    }
  }

  // A move into a cell whose occupant ends up staying fails; blocking can
  // cascade along chains, so iterate to a fixed point.
  for (bool changed = true; changed;) {
    changed = false;
    for (int i = 0; i < n; ++i) {
      if (result[i] != MoveResult::Moved) continue;
      for (int k = 0; k < n; ++k) {
        if (k != i && state.positions[k] == target[i] && result[k] != MoveResult::Moved) {
          result[i] = MoveResult::OccupiedCell;
          changed = true;
          break;
        }
      }
    }
  }
  return result;
}

StepEvents step(WorldState& state, std::span<const ActionId> actions) {
  const std::vector<MoveResult> moves = resolve_moves(state, actions);
  const int n = state.n_agents();

  StepEvents events;
  events.agents.resize(n);
  for (int i = 0; i < n; ++i) {
    auto& ev = events.agents[i];
    ev.action = actions[i];
    ev.move = moves[i];
    ev.dangerous = is_dangerous(moves[i]);
    ev.known_before = state.maps[i].known_count();
  }

  for (int i = 0; i < n; ++i) {
    if (moves[i] == MoveResult::Moved) {
      state.positions[i] = state.positions[i] + delta(action_direction(actions[i]));
      events.agents[i].stationary = false;
    }
  }

  for (int i = 0; i < n; ++i) {
    const int gain = update_map(state.maps[i], sense_fov(state.arena, state.positions, i));
    events.agents[i].sensed_gain = gain;
    events.agents[i].known_after_sense = events.agents[i].known_before + gain;
    for (int j = 0; j < n; ++j) {
      if (j != i) state.discovery(i, j) += gain;
    }
  }

  std::vector<int> communicators;
  for (int i = 0; i < n; ++i) {
    if (actions[i] == kCommunicate) communicators.push_back(i);
  }
  const auto networks = form_networks(state.positions, communicators, state.config.comm_range,
                                      state.config.cell_side);
  for (const CommNetwork& network : networks) {
    const int id = static_cast<int>(events.networks.size());
    for (int i : network) {
      auto& ev = events.agents[i];
      ev.network = id;
      ev.network_size = static_cast<int>(network.size());
      for (int j : network) {
        if (j != i) ev.peer_discoveries.push_back(state.discovery(i, j));
      }
    }
    const ApplyMergeResult merged = apply_merge(state, network);
    for (std::size_t k = 0; k < network.size(); ++k) {
      events.agents[network[k]].merge_gain = merged.gains[k];
    }
    events.networks.push_back({network, merged.gains, merged.known_after, merged.conflicts});
  }

  for (int i = 0; i < n; ++i) events.agents[i].known_after = state.maps[i].known_count();
  ++state.t;
  return events;
}

ActionMask available_actions(const WorldState& state, int agent) {
  ActionMask mask;
  const Cell from = state.positions[agent];
  for (int a = 0; a < kNumDirections; ++a) {
    const Direction d = action_direction(a);
    const Cell to = from + delta(d);
    if (state.arena.blocked(to)) continue;
    if (state.config.diagonal_through_free && is_diagonal(d) && squeezed(state.arena, from, d))
      continue;
    const auto occupant = state.agent_at(to);
    if (occupant && *occupant != agent) continue;
    mask.set(a);
  }
  mask.set(kStay);
  mask.set(kCommunicate);
  return mask;
}

}  // namespace comex
