#include "comex/serialize.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace comex {

namespace {

void expect_format(const nlohmann::json& j, const std::string& format) {
  if (!j.is_object() || j.value("format", std::string()) != format)
    throw ParseError("expected a '" + format + "' document", 0);
  if (j.value("version", 0) != kFormatVersion)
    throw ParseError("unsupported " + format + " version", 0);
}

template <typename SetCell>
void read_grid(const nlohmann::json& grid, int rows, int cols, int lo, int hi, SetCell set) {
  if (!grid.is_array() || static_cast<int>(grid.size()) != rows)
    throw ParseError("grid must be an array of " + std::to_string(rows) + " rows", 0);
  for (int r = 0; r < rows; ++r) {
    const auto& row = grid[r];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw ParseError("grid row " + std::to_string(r) + " must hold " + std::to_string(cols) + " cells", 0);
    for (int c = 0; c < cols; ++c) {
      if (!row[c].is_number_integer())
        throw ParseError("grid cell (" + std::to_string(r) + "," + std::to_string(c) + ") is not an integer", 0);
      const int v = row[c].get<int>();
      if (v < lo || v > hi)
        throw ParseError("grid cell (" + std::to_string(r) + "," + std::to_string(c) + ") value " +
                             std::to_string(v) + " out of range",
                         0);
      set(Cell{r, c}, v);
    }
  }
}

}  // namespace

nlohmann::json arena_to_json(const Arena& arena) {
  nlohmann::json grid = nlohmann::json::array();
  for (int r = 0; r < arena.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < arena.cols(); ++c) row.push_back(arena.occupied({r, c}) ? 1 : 0);
    grid.push_back(std::move(row));
  }
  return {{"format", "comex.arena"},
          {"version", kFormatVersion},
          {"rows", arena.rows()},
          {"cols", arena.cols()},
          {"cell_side", arena.cell_side()},
          {"obstacle_ratio", arena.obstacle_ratio()},
          {"grid", std::move(grid)}};
}

Arena arena_from_json(const nlohmann::json& j) {
  expect_format(j, "comex.arena");
  try {
    Arena arena(j.at("rows").get<int>(), j.at("cols").get<int>(), j.at("cell_side").get<double>(),
                j.at("obstacle_ratio").get<double>());
    read_grid(j.at("grid"), arena.rows(), arena.cols(), 0, 1,
              [&](Cell c, int v) { arena.set_occupied(c, v == 1); });
    return arena;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("arena: ") + e.what(), 0);
  }
}

nlohmann::json map_to_json(const ReconMap& map) {
  nlohmann::json grid = nlohmann::json::array();
  for (int r = 0; r < map.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < map.cols(); ++c) row.push_back(static_cast<int>(map.at({r, c})));
    grid.push_back(std::move(row));
  }
  return {{"format", "comex.map"},
          {"version", kFormatVersion},
          {"rows", map.rows()},
          {"cols", map.cols()},
          {"grid", std::move(grid)}};
}

ReconMap map_from_json(const nlohmann::json& j) {
  expect_format(j, "comex.map");
  try {
    const int rows = j.at("rows").get<int>();
    const int cols = j.at("cols").get<int>();
    if (rows < 1 || cols < 1) throw ParseError("map dimensions must be positive", 0);
    ReconMap map(rows, cols);
    read_grid(j.at("grid"), rows, cols, -1, 1,
              [&](Cell c, int v) { map.set(c, static_cast<Knowledge>(v)); });
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("map: ") + e.what(), 0);
  }
}

nlohmann::json parse_json_text(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t upto = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + upto, '\n'));
    throw ParseError("line " + std::to_string(line) + ": " + e.what(), line);
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

ReconMap load_map_file(const std::filesystem::path& path) {
  const nlohmann::json j = parse_json_text(read_text_file(path));
  if (j.is_object() && j.value("format", std::string()) == "comex.arena") return fully_known(arena_from_json(j));
  return map_from_json(j);
}

}  // namespace comex
