#include "comex/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace comex {

namespace {

constexpr char kMagic[8] = {'C', 'O', 'M', 'E', 'X', 'C', 'K', 'P'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

NetRole role_from_string(const std::string& s) {
  if (s == "actor") return NetRole::Actor;
  if (s == "critic") return NetRole::Critic;
  throw CheckpointError("unknown network role '" + s + "'");
}

}  // namespace

std::string encode_checkpoint(const std::vector<NamedNetwork>& networks) {
  nlohmann::json header;
  header["networks"] = nlohmann::json::array();
  for (const auto& [name, net] : networks) {
    nlohmann::json entry{{"name", name}, {"role", to_string(net.role())}, {"arch", to_json(net.spec())}};
    entry["tensors"] = nlohmann::json::array();
    for (const auto& t : net.params().tensors()) {
      entry["tensors"].push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
    }
    header["networks"].push_back(std::move(entry));
  }
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  for (const auto& [name, net] : networks) {
    for (const auto& t : net.params().tensors()) {
      for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.value.cols(); ++c) put<double>(out, t.value(r, c));
      }
    }
  }
  return out;
}

std::vector<NamedNetwork> decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("not a checkpoint file (bad magic)");
  std::size_t pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = take<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw CheckpointError("checkpoint truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header: ") + e.what());
  }
  pos += header_len;

  std::vector<NamedNetwork> out;
  for (const auto& entry : header.at("networks")) {
    Network net = Network::zeros(arch_spec_from_json(entry.at("arch")),
                                 role_from_string(entry.at("role").get<std::string>()));
    auto& tensors = net.params().tensors();
    const auto& shapes = entry.at("tensors");
    if (shapes.size() != tensors.size())
      throw CheckpointError("tensor count does not match architecture for '" +
                            entry.at("name").get<std::string>() + "'");
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      auto& t = tensors[k];
      if (shapes[k].at("name").get<std::string>() != t.name ||
          shapes[k].at("rows").get<Eigen::Index>() != t.value.rows() ||
          shapes[k].at("cols").get<Eigen::Index>() != t.value.cols())
        throw CheckpointError("tensor '" + t.name + "' shape does not match architecture");
      for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.value.cols(); ++c) t.value(r, c) = take<double>(bytes, pos);
      }
    }
    out.push_back({entry.at("name").get<std::string>(), std::move(net)});
  }
  if (pos != bytes.size()) throw CheckpointError("trailing bytes after checkpoint payload");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedNetwork>& networks) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot write " + path.string());
  const std::string bytes = encode_checkpoint(networks);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError("failed writing " + path.string());
}

std::vector<NamedNetwork> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace comex
