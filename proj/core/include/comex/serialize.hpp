#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

#include "comex/grid.hpp"

namespace comex {

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, int line) : std::runtime_error(what), line(line) {}
  int line;  // 0 when the location is unknown
};

inline constexpr int kFormatVersion = 1;

// Grids are stored as nested row arrays: arena cells in {0, 1}, map cells in
// {-1, 0, 1}.
nlohmann::json arena_to_json(const Arena& arena);
Arena arena_from_json(const nlohmann::json& j);

nlohmann::json map_to_json(const ReconMap& map);
ReconMap map_from_json(const nlohmann::json& j);

// Parses JSON text, converting syntax errors into ParseError with the
// 1-based line number of the offending byte.
nlohmann::json parse_json_text(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Accepts either a reconstructed map or an arena (treated as fully known).
ReconMap load_map_file(const std::filesystem::path& path);

}  // namespace comex
