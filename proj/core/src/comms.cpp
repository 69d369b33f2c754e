#include "comex/comms.hpp"

#include <algorithm>
#include <numeric>

#include "comex/obsmap.hpp"
#include "comex/world.hpp"

namespace comex {

std::vector<CommNetwork> form_networks(std::span<const Cell> positions,
                                       std::span<const int> communicators,
                                       double comm_range, double cell_side) {
  std::vector<int> nodes(communicators.begin(), communicators.end());
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  const std::size_t n = nodes.size();
  std::vector<int> component(n, -1);
  std::vector<CommNetwork> networks;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (component[seed] >= 0) continue;
    const int id = static_cast<int>(networks.size());
    CommNetwork members;
    std::vector<std::size_t> frontier{seed};
    component[seed] = id;
    while (!frontier.empty()) {
      const std::size_t u = frontier.back();
      frontier.pop_back();
      members.push_back(nodes[u]);
      for (std::size_t v = 0; v < n; ++v) {
        if (component[v] >= 0) continue;
        if (within_range(positions[nodes[u]], positions[nodes[v]], comm_range, cell_side)) {
          component[v] = id;
          frontier.push_back(v);
        }
      }
    }
    std::sort(members.begin(), members.end());
    networks.push_back(std::move(members));
  }
  return networks;
}

MergeResult merge_maps(std::span<const ReconMap* const> maps) {
  if (maps.empty()) throw std::invalid_argument("merge_maps: no maps");
  MergeResult result{*maps.front(), 0};
  auto out = result.map.cells();
  for (std::size_t m = 1; m < maps.size(); ++m) {
    const ReconMap& other = *maps[m];
    if (other.rows() != result.map.rows() || other.cols() != result.map.cols())
      throw std::invalid_argument("merge_maps: dimension mismatch");
    const auto in = other.cells();
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (in[i] == Knowledge::Unknown || in[i] == out[i]) continue;
      if (out[i] == Knowledge::Unknown) {
        out[i] = in[i];
      } else {
        out[i] = Knowledge::Occupied;
        ++result.conflicts;
      }
    }
  }
  return result;
}

MergeResult merge_maps(std::span<const ReconMap> maps) {
  std::vector<const ReconMap*> ptrs;
  ptrs.reserve(maps.size());
  for (const auto& m : maps) ptrs.push_back(&m);
  return merge_maps(std::span<const ReconMap* const>(ptrs));
}

ApplyMergeResult apply_merge(WorldState& state, const CommNetwork& network) {
  ApplyMergeResult result;
  result.gains.assign(network.size(), 0);
  if (network.empty()) return result;

  std::vector<const ReconMap*> member_maps;
  for (int i : network) member_maps.push_back(&state.maps[i]);
  MergeResult merged = merge_maps(std::span<const ReconMap* const>(member_maps));
  result.known_after = merged.map.known_count();
  result.conflicts = merged.conflicts;

  const int n = state.n_agents();
  std::vector<bool> in_network(n, false);
  for (int i : network) in_network[i] = true;

  for (std::size_t k = 0; k < network.size(); ++k) {
    const int i = network[k];
    const int gain = result.known_after - state.maps[i].known_count();
    result.gains[k] = gain;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (in_network[j]) {
        state.discovery(i, j) = 0;
      } else {
        state.discovery(i, j) += gain;
      }
    }
  }
  for (int i : network) state.maps[i] = merged.map;
  return result;
}

}  // namespace comex
