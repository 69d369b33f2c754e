#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace comex {

struct Cell {
  int row = 0;
  int col = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;

  Cell operator+(const Cell& o) const { return {row + o.row, col + o.col}; }
  Cell operator-(const Cell& o) const { return {row - o.row, col - o.col}; }
};

// Moves are ordered clockwise starting north; row 0 is the northern edge.
enum class Direction : std::uint8_t { N, NE, E, SE, S, SW, W, NW };

inline constexpr int kNumDirections = 8;

inline constexpr std::array<Cell, kNumDirections> kDirectionDelta = {{
    {-1, 0},   // N
    {-1, 1},   // NE
    {0, 1},    // E
    {1, 1},    // SE
    {1, 0},    // S
    {1, -1},   // SW
    {0, -1},   // W
    {-1, -1},  // NW
}};

inline constexpr std::array<const char*, kNumDirections> kDirectionName = {
    "N", "NE", "E", "SE", "S", "SW", "W", "NW"};

inline constexpr Cell delta(Direction d) {
  return kDirectionDelta[static_cast<int>(d)];
}

inline constexpr bool is_diagonal(Direction d) {
  return static_cast<int>(d) % 2 == 1;
}

// Action ids 0..7 are moves in Direction order, 8 = stay, 9 = communicate.
using ActionId = int;

inline constexpr int kNumActions = 10;
inline constexpr ActionId kStay = 8;
inline constexpr ActionId kCommunicate = 9;

inline constexpr bool is_move(ActionId a) { return a >= 0 && a < kNumDirections; }
inline constexpr bool is_valid_action(ActionId a) { return a >= 0 && a < kNumActions; }

inline constexpr Direction action_direction(ActionId a) {
  return static_cast<Direction>(a);
}

// Sensing is a 3x3 square around the agent.
inline constexpr int kSensingRadiusCells = 1;
inline constexpr int kFovSide = 2 * kSensingRadiusCells + 1;
inline constexpr int kFovCells = kFovSide * kFovSide;
inline constexpr int kFprFeatures = 3 * kNumDirections;

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace comex

template <>
struct std::hash<comex::Cell> {
  std::size_t operator()(const comex::Cell& c) const noexcept {
    return std::hash<long long>{}((static_cast<long long>(c.row) << 32) ^
                                  static_cast<unsigned>(c.col));
  }
};
