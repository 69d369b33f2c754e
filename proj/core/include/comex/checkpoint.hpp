#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "comex/network.hpp"

namespace comex {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NamedNetwork {
  std::string name;
  Network network;
};

// Binary container:
//   "COMEXCKP" | u32 version | u64 header length | JSON header |
//   row-major little-endian float64 payload for every tensor in header order.
// The header records the architecture, role and tensor shapes of each network.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const std::vector<NamedNetwork>& networks);
std::vector<NamedNetwork> decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedNetwork>& networks);
std::vector<NamedNetwork> load_checkpoint(const std::filesystem::path& path);

}  // namespace comex
