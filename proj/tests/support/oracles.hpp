#pragma once

// Reference implementations used to check the library. None of them call the
// code they are compared against.

#include <functional>
#include <optional>
#include <vector>

#include "comex/grid.hpp"
#include "comex/network.hpp"
#include "comex/rng.hpp"
#include "comex/world.hpp"

namespace comex::testing {

// Shortest 8-connected move counts over Free cells from `start`; -1 where
// unreachable.
std::vector<int> bfs_distances(const ReconMap& map, Cell start);

// Cells reachable from `start` through Free cells (8-connected), found with an
// explicit-stack depth-first fill.
std::vector<bool> flood_reachable(const ReconMap& map, Cell start);

// Free cells with an Unknown 4-neighbor, by exhaustive scan.
std::vector<Cell> frontier_scan(const ReconMap& map);

// Arena cells revealed with probability `p`, plus a guaranteed known-free
// position returned through `position`.
ReconMap random_partial_map(const Arena& arena, double p, Rng& rng, Cell* position);

// A map with random Free/Occupied/Unknown cells that need not be consistent
// with any arena.
ReconMap random_ternary_map(int rows, int cols, Rng& rng);

// Maps consistent with one hidden arena (the merge contract).
ReconMap random_consistent_map(const Arena& arena, double p, Rng& rng);

struct ExpectedMove {
  Cell end;
  bool dangerous;
};

// Outcome of a two-agent joint action, written out case by case.
std::vector<ExpectedMove> resolve_two_agents(const Arena& arena, Cell a, Cell b, ActionId act_a, ActionId act_b);

// Largest elementwise relative error |analytic - numeric| / max(|analytic|,
// |numeric|, floor) over every parameter, with central differences of step h.
double max_relative_error(nn::ParamSet& params, const nn::ParamSet& analytic,
                          const std::function<double()>& objective, double h = 1e-5, double floor = 1e-6);

// Small architectures that keep finite-difference checks quick.
ArchSpec toy_arch(ArchKind kind, int n_agents);

// Adds N(0, scale^2) noise to every parameter. Fresh networks have zero
// biases, which puts binary inputs exactly on ReLU kinks.
void jitter(nn::ParamSet& params, double scale, Rng& rng);

}  // namespace comex::testing
