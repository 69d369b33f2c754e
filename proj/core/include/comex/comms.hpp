#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "comex/grid.hpp"
#include "comex/types.hpp"

namespace comex {

struct WorldState;

// One network: ascending agent indices.
using CommNetwork = std::vector<int>;

// Connected components of the proximity graph over `communicators`. Networks
// are returned in order of their smallest member; singletons are included.
std::vector<CommNetwork> form_networks(std::span<const Cell> positions,
                                       std::span<const int> communicators,
                                       double comm_range, double cell_side);

struct MergeResult {
  ReconMap map;
  // Cells where one map says Free and another Occupied. Occupied wins.
  int conflicts = 0;
};

// Cell-wise knowledge union. Throws std::invalid_argument on an empty list or
// mismatched dimensions.
MergeResult merge_maps(std::span<const ReconMap> maps);
MergeResult merge_maps(std::span<const ReconMap* const> maps);

struct ApplyMergeResult {
  std::vector<int> gains;  // aligned with the network members
  int known_after = 0;
  int conflicts = 0;
};

// Replaces every member map with the union and resets q between co-members.
// Each member's merge gain is added to its counters toward non-members.
ApplyMergeResult apply_merge(WorldState& state, const CommNetwork& network);

}  // namespace comex
