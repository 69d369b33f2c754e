#include "comex/obsmap.hpp"

#include <cmath>

#include "comex/frontier.hpp"

namespace comex {

FovPatch sense_fov(const Arena& arena, std::span<const Cell> positions, int agent) {
  FovPatch patch;
  patch.center = positions[agent];
  for (int k = 0; k < kFovCells; ++k) {
    const Cell c = patch.center + FovPatch::offset(k);
    FovCell value = FovCell::Free;
    if (!arena.in_bounds(c)) {
      value = FovCell::OffGrid;
    } else if (arena.occupied(c)) {
      value = FovCell::StaticObstacle;
    } else {
      for (int j = 0; j < static_cast<int>(positions.size()); ++j) {
        if (j != agent && positions[j] == c) {
          value = FovCell::Agent;
          break;
        }
      }
    }
    patch.cells[k] = value;
  }
  return patch;
}

int update_map(ReconMap& map, const FovPatch& patch) {
  int gained = 0;
  for (int k = 0; k < kFovCells; ++k) {
    if (patch.cells[k] == FovCell::OffGrid) continue;
    const Cell c = patch.center + FovPatch::offset(k);
    if (!map.in_bounds(c) || map.at(c) != Knowledge::Unknown) continue;
    map.set(c, patch.cells[k] == FovCell::StaticObstacle ? Knowledge::Occupied : Knowledge::Free);
    ++gained;
  }
  return gained;
}

bool within_range(Cell a, Cell b, double range, double cell_side) {
  const double dr = a.row - b.row;
  const double dc = a.col - b.col;
  return cell_side * std::sqrt(dr * dr + dc * dc) <= range;
}

std::vector<std::uint8_t> net_vector(std::span<const Cell> positions, int agent,
                                     double comm_range, double cell_side) {
  std::vector<std::uint8_t> bits(positions.size(), 0);
  for (std::size_t j = 0; j < positions.size(); ++j) {
    bits[j] = within_range(positions[agent], positions[j], comm_range, cell_side) ? 1 : 0;
  }
  bits[agent] = 1;
  return bits;
}

std::vector<double> Observation::features() const {
  std::vector<double> out;
  out.reserve(feature_count());
  append_features(out);
  return out;
}

void Observation::append_features(std::vector<double>& out) const {
  out.insert(out.end(), fov.begin(), fov.end());
  out.insert(out.end(), fpr.begin(), fpr.end());
  out.insert(out.end(), net.begin(), net.end());
}

Observation build_observation(const WorldState& state, int agent) {
  Observation obs;
  const FovPatch patch = sense_fov(state.arena, state.positions, agent);
  for (int k = 0; k < kFovCells; ++k) obs.fov[k] = patch.occupied(k) ? 1.0 : 0.0;

  obs.fpr = fpr_features(state.maps[agent], state.positions[agent]).normalized;

  const auto bits = net_vector(state.positions, agent, state.config.comm_range, state.config.cell_side);
  obs.net.assign(bits.begin(), bits.end());

  obs.mask = available_actions(state, agent);
  return obs;
}

}  // namespace comex
