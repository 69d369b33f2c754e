#include "comex/grid.hpp"

#include <algorithm>
#include <stdexcept>

namespace comex {

Arena::Arena(int rows, int cols, double cell_side, double obstacle_ratio)
    : rows_(rows),
      cols_(cols),
      cell_side_(cell_side),
      obstacle_ratio_(obstacle_ratio),
      occupied_(static_cast<std::size_t>(rows) * cols, 0) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("Arena: empty grid");
}

int Arena::occupied_count() const {
  return static_cast<int>(std::count(occupied_.begin(), occupied_.end(), 1));
}

std::vector<Cell> Arena::free_cells() const {
  std::vector<Cell> out;
  for (int i = 0; i < area(); ++i) {
    if (!occupied_[i]) out.push_back(cell_at(i));
  }
  return out;
}

bool Arena::free_space_connected() const {
  const int total_free = area() - occupied_count();
  if (total_free == 0) return true;
  int start = 0;
  while (occupied_[start]) ++start;

  std::vector<std::uint8_t> seen(area(), 0);
  std::vector<int> stack{start};
  seen[start] = 1;
  int visited = 0;
  while (!stack.empty()) {
    const Cell c = cell_at(stack.back());
    stack.pop_back();
    ++visited;
    for (const Cell d : kDirectionDelta) {
      const Cell nb = c + d;
      if (!in_bounds(nb)) continue;
      const int ni = index(nb);
      if (occupied_[ni] || seen[ni]) continue;
      seen[ni] = 1;
      stack.push_back(ni);
    }
  }
  return visited == total_free;
}

int ReconMap::known_count() const {
  return static_cast<int>(std::count_if(cells_.begin(), cells_.end(),
                                        [](Knowledge k) { return k != Knowledge::Unknown; }));
}

ReconMap fully_known(const Arena& arena) {
  ReconMap map(arena.rows(), arena.cols());
  for (int i = 0; i < arena.area(); ++i) {
    const Cell c = arena.cell_at(i);
    map.set(c, arena.occupied(c) ? Knowledge::Occupied : Knowledge::Free);
  }
  return map;
}

}  // namespace comex
