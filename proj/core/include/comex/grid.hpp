#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "comex/types.hpp"

namespace comex {

// Ground-truth occupancy. Serialized values: 0 free, 1 occupied.
class Arena {
 public:
  Arena() = default;
  Arena(int rows, int cols, double cell_side, double obstacle_ratio);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int area() const { return rows_ * cols_; }
  double cell_side() const { return cell_side_; }
  double obstacle_ratio() const { return obstacle_ratio_; }

  bool in_bounds(Cell c) const {
    return c.row >= 0 && c.row < rows_ && c.col >= 0 && c.col < cols_;
  }
  int index(Cell c) const { return c.row * cols_ + c.col; }
  Cell cell_at(int index) const { return {index / cols_, index % cols_}; }

  bool occupied(Cell c) const { return occupied_[index(c)] != 0; }
  // Off-grid cells behave as walls.
  bool blocked(Cell c) const { return !in_bounds(c) || occupied(c); }
  void set_occupied(Cell c, bool value) { occupied_[index(c)] = value ? 1 : 0; }

  int occupied_count() const;
  std::vector<Cell> free_cells() const;

  // True when the free cells form a single 8-connected component.
  bool free_space_connected() const;

  std::span<const std::uint8_t> raw() const { return occupied_; }

  friend bool operator==(const Arena&, const Arena&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  double cell_side_ = 0.0;
  double obstacle_ratio_ = 0.0;
  std::vector<std::uint8_t> occupied_;
};

enum class Knowledge : std::int8_t { Unknown = -1, Free = 0, Occupied = 1 };

// An agent's reconstructed map.
class ReconMap {
 public:
  ReconMap() = default;
  ReconMap(int rows, int cols) : rows_(rows), cols_(cols), cells_(rows * cols, Knowledge::Unknown) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int area() const { return rows_ * cols_; }
  bool in_bounds(Cell c) const {
    return c.row >= 0 && c.row < rows_ && c.col >= 0 && c.col < cols_;
  }
  int index(Cell c) const { return c.row * cols_ + c.col; }
  Cell cell_at(int index) const { return {index / cols_, index % cols_}; }

  Knowledge at(Cell c) const { return cells_[index(c)]; }
  void set(Cell c, Knowledge k) { cells_[index(c)] = k; }
  bool is_free(Cell c) const { return in_bounds(c) && at(c) == Knowledge::Free; }
  bool is_unknown(Cell c) const { return in_bounds(c) && at(c) == Knowledge::Unknown; }

  // Cells that are Free or Occupied.
  int known_count() const;

  std::span<const Knowledge> cells() const { return cells_; }
  std::span<Knowledge> cells() { return cells_; }

  friend bool operator==(const ReconMap&, const ReconMap&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Knowledge> cells_;
};

// A map in which every cell carries its ground-truth value.
ReconMap fully_known(const Arena& arena);

}  // namespace comex
