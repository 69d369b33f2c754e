#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "comex/grid.hpp"
#include "comex/types.hpp"
#include "comex/world.hpp"

namespace comex {

enum class FovCell : std::uint8_t {
  Free,
  StaticObstacle,
  Agent,    // dynamic obstacle on a statically free cell
  OffGrid,
};

// 3x3 patch, row-major from NW to SE, centered on `center`.
struct FovPatch {
  Cell center;
  std::array<FovCell, kFovCells> cells{};

  bool occupied(int k) const { return cells[k] != FovCell::Free; }
  static Cell offset(int k) { return {k / kFovSide - kSensingRadiusCells, k % kFovSide - kSensingRadiusCells}; }
};

FovPatch sense_fov(const Arena& arena, std::span<const Cell> positions, int agent);

// Writes every Unknown in-grid cell covered by the patch and returns how many
// cells left Unknown. Agents are transient, so their cells are recorded Free.
int update_map(ReconMap& map, const FovPatch& patch);

// Cell-center Euclidean distance scaled by the cell side, compared to `range`.
bool within_range(Cell a, Cell b, double range, double cell_side);

std::vector<std::uint8_t> net_vector(std::span<const Cell> positions, int agent,
                                     double comm_range, double cell_side);

struct Observation {
  std::array<double, kFovCells> fov{};
  std::array<double, kFprFeatures> fpr{};
  std::vector<double> net;
  ActionMask mask;

  std::size_t feature_count() const { return fov.size() + fpr.size() + net.size(); }
  // fov | fpr | net, the policy input.
  std::vector<double> features() const;
  void append_features(std::vector<double>& out) const;
};

inline constexpr std::size_t observation_size(int n_agents) {
  return kFovCells + kFprFeatures + static_cast<std::size_t>(n_agents);
}

Observation build_observation(const WorldState& state, int agent);

}  // namespace comex
