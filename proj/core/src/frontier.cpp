#include "comex/frontier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <queue>
#include <stdexcept>

namespace comex {

std::vector<Cell> detect_frontiers(const ReconMap& map) {
  static constexpr std::array<Cell, 4> kFourNeighbors = {{{-1, 0}, {0, 1}, {1, 0}, {0, -1}}};
  std::vector<Cell> out;
  for (int i = 0; i < map.area(); ++i) {
    const Cell c = map.cell_at(i);
    if (map.at(c) != Knowledge::Free) continue;
    for (const Cell d : kFourNeighbors) {
      if (map.is_unknown(c + d)) {
        out.push_back(c);
        break;
      }
    }
  }
  return out;
}

namespace {

int chebyshev(Cell a, Cell b) { return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col)); }

struct OpenEntry {
  int f;
  int h;
  long seq;
  int index;

  bool operator>(const OpenEntry& o) const {
    if (f != o.f) return f > o.f;
    if (h != o.h) return h > o.h;
    return seq > o.seq;
  }
};

// Per-thread search buffers; `stamp` marks which entries belong to the
// current search so nothing is cleared between calls.
struct SearchWorkspace {
  std::vector<int> g;
  std::vector<int> parent;
  std::vector<unsigned> seen_stamp;
  std::vector<unsigned> closed_stamp;
  std::vector<OpenEntry> heap;
  unsigned stamp = 0;

  void prepare(int area) {
    if (static_cast<int>(g.size()) < area) {
      g.assign(area, 0);
      parent.assign(area, -1);
      seen_stamp.assign(area, 0);
      closed_stamp.assign(area, 0);
    }
    if (++stamp == 0) {
      std::fill(seen_stamp.begin(), seen_stamp.end(), 0);
      std::fill(closed_stamp.begin(), closed_stamp.end(), 0);
      stamp = 1;
    }
    heap.clear();
  }
};

}  // namespace

std::optional<Path> astar(const ReconMap& map, Cell start, Cell goal) {
  if (!map.is_free(start)) throw std::invalid_argument("astar: start cell is not Free");
  if (!map.is_free(goal)) return std::nullopt;

  thread_local SearchWorkspace ws;
  ws.prepare(map.area());
  const auto cmp = std::greater<OpenEntry>{};
  long seq = 0;

  const int start_index = map.index(start);
  const int goal_index = map.index(goal);
  ws.g[start_index] = 0;
  ws.parent[start_index] = -1;
  ws.seen_stamp[start_index] = ws.stamp;
  const int h0 = chebyshev(start, goal);
  ws.heap.push_back({h0, h0, seq++, start_index});

  bool found = false;
  while (!ws.heap.empty()) {
    std::pop_heap(ws.heap.begin(), ws.heap.end(), cmp);
    const OpenEntry top = ws.heap.back();
    ws.heap.pop_back();
    if (ws.closed_stamp[top.index] == ws.stamp) continue;
    ws.closed_stamp[top.index] = ws.stamp;
    if (top.index == goal_index) {
      found = true;
      break;
    }
    const Cell c = map.cell_at(top.index);
    const int next_g = ws.g[top.index] + 1;
    for (const Cell d : kDirectionDelta) {
      const Cell nb = c + d;
      if (!map.is_free(nb)) continue;
      const int ni = map.index(nb);
      if (ws.closed_stamp[ni] == ws.stamp) continue;
      if (ws.seen_stamp[ni] == ws.stamp && ws.g[ni] <= next_g) continue;
      ws.seen_stamp[ni] = ws.stamp;
      ws.g[ni] = next_g;
      ws.parent[ni] = top.index;
      const int h = chebyshev(nb, goal);
      ws.heap.push_back({next_g + h, h, seq++, ni});
      std::push_heap(ws.heap.begin(), ws.heap.end(), cmp);
    }
  }
  if (!found) return std::nullopt;

  Path path;
  for (int i = goal_index; i != -1; i = ws.parent[i]) path.cells.push_back(map.cell_at(i));
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

int FprTable::total_count() const {
  int total = 0;
  for (const auto& d : directions) total += d.count;
  return total;
}

std::array<double, kFprFeatures> normalize_fpr(const FprTable& table) {
  std::array<double, kFprFeatures> out{};
  const double total = table.total_count();
  double max_mean = 0.0;
  double max_std = 0.0;
  for (const auto& d : table.directions) {
    max_mean = std::max(max_mean, d.mean);
    max_std = std::max(max_std, d.stddev);
  }
  for (int k = 0; k < kNumDirections; ++k) {
    const auto& d = table.directions[k];
    out[3 * k + 0] = total > 0 ? d.count / total : 0.0;
    out[3 * k + 1] = max_mean > 0 ? d.mean / max_mean : 0.0;
    out[3 * k + 2] = max_std > 0 ? d.stddev / max_std : 0.0;
  }
  return out;
}

FprResult fpr_features(const ReconMap& map, Cell position) {
  if (!map.is_free(position)) throw std::invalid_argument("fpr_features: position is not Free");

  FprResult result;
  result.frontiers = detect_frontiers(map);

  std::array<std::vector<int>, kNumDirections> lengths;
  for (const Cell f : result.frontiers) {
    if (f == position) continue;
    const auto path = astar(map, position, f);
    if (!path) continue;
    const Cell step = path->cells[1] - path->cells[0];
    const auto it = std::find(kDirectionDelta.begin(), kDirectionDelta.end(), step);
    lengths[it - kDirectionDelta.begin()].push_back(path->length());
    ++result.reachable;
  }

  for (int k = 0; k < kNumDirections; ++k) {
    const auto& ls = lengths[k];
    auto& stats = result.table.directions[k];
    stats.count = static_cast<int>(ls.size());
    if (ls.empty()) continue;
    double sum = 0.0;
    for (int l : ls) sum += l;
    stats.mean = sum / ls.size();
    double sq = 0.0;
    for (int l : ls) sq += (l - stats.mean) * (l - stats.mean);
    stats.stddev = std::sqrt(sq / ls.size());
  }
  result.normalized = normalize_fpr(result.table);
  return result;
}

}  // namespace comex
