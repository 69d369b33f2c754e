#pragma once

#include <array>
#include <optional>
#include <vector>

#include "comex/grid.hpp"
#include "comex/types.hpp"

namespace comex {

// Free cells with at least one 4-neighbor still Unknown, in row-major order.
std::vector<Cell> detect_frontiers(const ReconMap& map);

struct Path {
  std::vector<Cell> cells;  // start first, goal last
  int length() const { return static_cast<int>(cells.size()) - 1; }
};

// Shortest 8-connected path over Free cells with unit move cost and the
// Chebyshev heuristic. Ties in the open list are broken by (f, h, insertion
// order), neighbors being expanded N, NE, ..., NW. Returns nullopt when the
// goal cannot be reached. Throws std::invalid_argument if start is not Free.
std::optional<Path> astar(const ReconMap& map, Cell start, Cell goal);

struct DirectionStats {
  int count = 0;
  double mean = 0.0;    // mean path length in moves
  double stddev = 0.0;  // population standard deviation

  friend bool operator==(const DirectionStats&, const DirectionStats&) = default;
};

struct FprTable {
  std::array<DirectionStats, kNumDirections> directions{};

  int total_count() const;
  friend bool operator==(const FprTable&, const FprTable&) = default;
};

struct FprResult {
  FprTable table;
  std::array<double, kFprFeatures> normalized{};
  std::vector<Cell> frontiers;  // all detected, including unreachable ones
  int reachable = 0;            // frontiers contributing to the table
};

// Counts become shares of the total; means and deviations are divided by
// their maximum over directions. 0/0 is 0. Layout: (n, mu, sigma) per
// direction, directions N..NW.
std::array<double, kFprFeatures> normalize_fpr(const FprTable& table);

// Frontier reachability features of `position` on `map`. Throws
// std::invalid_argument if the position is not Free.
FprResult fpr_features(const ReconMap& map, Cell position);

}  // namespace comex
