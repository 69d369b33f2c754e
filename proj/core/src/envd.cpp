#include "comex/envd.hpp"

#include <fmt/format.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>
#include <vector>

#include "comex/eval.hpp"
#include "comex/obsmap.hpp"
#include "comex/reward.hpp"

namespace comex::envd {

namespace {

constexpr std::size_t kMaxLineBytes = 1 << 20;

nlohmann::json reply(const nlohmann::json& id, const char* type, nlohmann::json payload) {
  return {{"version", kProtocolVersion}, {"id", id}, {"type", type}, {"payload", std::move(payload)}};
}

nlohmann::json error_reply(const nlohmann::json& id, const std::string& code, const std::string& message) {
  return {{"version", kProtocolVersion},
          {"id", id},
          {"type", "error"},
          {"payload", {{"code", code}, {"message", message}}}};
}

nlohmann::json positions_json(const WorldState& state) {
  nlohmann::json out = nlohmann::json::array();
  for (const Cell c : state.positions) out.push_back({c.row, c.col});
  return out;
}

nlohmann::json events_json(const StepEvents& events) {
  nlohmann::json agents = nlohmann::json::array();
  for (const auto& ev : events.agents) {
    agents.push_back({{"move", to_string(ev.move)},
                      {"dangerous", ev.dangerous},
                      {"stationary", ev.stationary},
                      {"sensed_gain", ev.sensed_gain},
                      {"merge_gain", ev.merge_gain},
                      {"network", ev.network},
                      {"known", ev.known_after}});
  }
  nlohmann::json networks = nlohmann::json::array();
  for (const auto& net : events.networks) {
    networks.push_back({{"members", net.members}, {"gains", net.gains}, {"conflicts", net.conflicts}});
  }
  return {{"agents", std::move(agents)}, {"merges", std::move(networks)}};
}

}  // namespace

nlohmann::json observation_layout(int n_agents) {
  nlohmann::json out = nlohmann::json::array();
  int offset = 0;
  for (const auto& [name, length] : {std::pair<const char*, int>{"fov", kFovCells},
                                     {"fpr", kFprFeatures},
                                     {"net", n_agents},
                                     {"mask", kNumActions}}) {
    out.push_back({{"name", name}, {"offset", offset}, {"length", length}});
    offset += length;
  }
  return out;
}

nlohmann::json observation_payload(const WorldState& state) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < state.config.n_agents; ++i) {
    const Observation obs = build_observation(state, i);
    std::vector<double> flat = obs.features();
    for (int a = 0; a < kNumActions; ++a) flat.push_back(obs.mask.test(a) ? 1.0 : 0.0);
    out.push_back(std::move(flat));
  }
  return out;
}

Session::Session(EnvConfig defaults) : defaults_(std::move(defaults)) { defaults_.validate(); }

bool Session::done() const { return state_ && state_->t >= state_->config.horizon; }

std::string Session::handle_line(const std::string& line) {
  nlohmann::json request;
  try {
    request = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    return error_reply(nullptr, kBadMessage, std::string("malformed JSON: ") + e.what()).dump();
  }
  return handle(request).dump();
}

nlohmann::json Session::handle(const nlohmann::json& request) {
  nlohmann::json id = nullptr;
  try {
    if (!request.is_object()) throw ProtocolError(kBadMessage, "request must be a JSON object");
    if (request.contains("id")) id = request["id"];
    if (!request.contains("version")) throw ProtocolError(kBadMessage, "missing field 'version'");
    const auto& version = request["version"];
    if (!version.is_number_integer() || version.get<long long>() != kProtocolVersion)
      throw ProtocolError(kVersionMismatch,
                          fmt::format("server speaks version {}, request has {}", kProtocolVersion, version.dump()));
    if (!request.contains("type") || !request["type"].is_string())
      throw ProtocolError(kBadMessage, "missing string field 'type'");
    const nlohmann::json payload = request.value("payload", nlohmann::json::object());
    if (!payload.is_object()) throw ProtocolError(kBadMessage, "'payload' must be an object");
    if (closed_) throw ProtocolError(kBadMessage, "session is closed");

    const std::string type = request["type"].get<std::string>();
    if (type == "reset") return reply(id, "reset_ok", on_reset(payload));
    if (type == "step") return reply(id, "step_ok", on_step(payload));
    if (type == "close") return reply(id, "close_ok", on_close(payload));
    throw ProtocolError(kBadMessage, "unknown message type '" + type + "'");
  } catch (const ProtocolError& e) {
    return error_reply(id, e.code, e.what());
  }
}

nlohmann::json Session::on_reset(const nlohmann::json& payload) {
  std::uint64_t seed = 0;
  if (payload.contains("seed")) {
    const auto& raw = payload["seed"];
    if (!raw.is_number_integer() || (!raw.is_number_unsigned() && raw.get<long long>() < 0))
      throw ProtocolError(kBadMessage, "'seed' must be a non-negative integer");
    seed = payload["seed"].get<std::uint64_t>();
  }
  EnvConfig config = defaults_;
  try {
    if (payload.contains("config")) config = env_config_from_json(payload["config"], defaults_);
    config.validate();
  } catch (const ConfigError& e) {
    throw ProtocolError(kBadConfig, e.what());
  }
  std::optional<WorldState> fresh;
  try {
    fresh = reset_episode(seed, config);
  } catch (const GenerationError& e) {
    throw ProtocolError(kBadConfig, e.what());
  }
  state_ = std::move(fresh);
  recorder_.emplace(seed, *state_);

  return {{"seed", seed},
          {"config", to_json(config)},
          {"rows", config.rows},
          {"cols", config.cols},
          {"n_agents", config.n_agents},
          {"horizon", config.horizon},
          {"t", 0},
          {"layout", observation_layout(config.n_agents)},
          {"observations", observation_payload(*state_)},
          {"positions", positions_json(*state_)}};
}

nlohmann::json Session::on_step(const nlohmann::json& payload) {
  if (!state_) throw ProtocolError(kNoEpisode, "send 'reset' before 'step'");
  if (done()) throw ProtocolError(kEpisodeDone, "episode reached its horizon; send 'reset'");
  const int n = state_->config.n_agents;
  if (!payload.contains("actions") || !payload["actions"].is_array())
    throw ProtocolError(kBadMessage, "'actions' must be an array");
  const auto& raw = payload["actions"];
  if (static_cast<int>(raw.size()) != n)
    throw ProtocolError(kBadAction, fmt::format("expected {} actions, got {}", n, raw.size()));
  std::vector<ActionId> actions;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!raw[i].is_number_integer() || raw[i].get<long long>() < 0 || raw[i].get<long long>() >= kNumActions)
      throw ProtocolError(kBadAction, fmt::format("action {} of agent {} is not in [0, 9]", raw[i].dump(), i));
    actions.push_back(raw[i].get<int>());
  }

  StepEvents events = step(*state_, actions);
  const TraceStep& recorded = recorder_->record(*state_, actions, std::move(events));
  const ExplorationRatios ratios = exploration_ratio(*state_);
  return {{"t", state_->t},
          {"done", done()},
          {"observations", observation_payload(*state_)},
          {"positions", positions_json(*state_)},
          {"rewards", recorded.rewards.per_agent},
          {"joint_reward", recorded.rewards.joint},
          {"exploration", {{"per_agent", ratios.per_agent}, {"max", ratios.max}, {"union", ratios.union_ratio}}},
          {"events", events_json(recorded.events)}};
}

nlohmann::json Session::on_close(const nlohmann::json& payload) {
  nlohmann::json out = {{"steps", state_ ? state_->t : 0}};
  if (payload.value("trace", false)) out["trace"] = recorder_ ? trace_to_json(recorder_->trace()) : nlohmann::json();
  closed_ = true;
  return out;
}

namespace {

struct AddressParts {
  std::string host;
  std::string port;
};

AddressParts split_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) return {"", address};
  return {address.substr(0, colon), address.substr(colon + 1)};
}

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

void serve_connection(int fd, EnvConfig defaults, const std::atomic<bool>& stop) {
  Session session(std::move(defaults));
  std::string buffer;
  char chunk[4096];
  while (!stop && !session.closed()) {
    pollfd p{fd, POLLIN, 0};
    const int ready = ::poll(&p, 1, 100);
    if (ready < 0 && errno != EINTR) break;
    if (ready <= 0) continue;
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));

    std::size_t start = 0;
    for (auto nl = buffer.find('\n'); nl != std::string::npos; nl = buffer.find('\n', start)) {
      std::string line = buffer.substr(start, nl - start);
      start = nl + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      if (!send_all(fd, session.handle_line(line) + "\n")) {
        ::close(fd);
        return;
      }
      if (session.closed()) break;
    }
    buffer.erase(0, start);
    if (buffer.size() > kMaxLineBytes) {
      send_all(fd, error_reply(nullptr, kBadMessage, "line exceeds 1 MiB").dump() + "\n");
      break;
    }
  }
  ::close(fd);
}

}  // namespace

void serve(const std::string& address, const EnvConfig& defaults, const std::atomic<bool>& stop,
           const std::function<void(int port)>& on_listening) {
  defaults.validate();
  const AddressParts parts = split_address(address);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* found = nullptr;
  const int rc = ::getaddrinfo(parts.host.empty() ? nullptr : parts.host.c_str(), parts.port.c_str(), &hints, &found);
  if (rc != 0) throw ServeError(fmt::format("cannot resolve '{}': {}", address, ::gai_strerror(rc)));

  int listener = -1;
  std::string last_error = "no usable address";
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    listener = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (listener < 0) continue;
    const int one = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listener, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(listener, 16) == 0) break;
    last_error = std::strerror(errno);
    ::close(listener);
    listener = -1;
  }
  ::freeaddrinfo(found);
  if (listener < 0) throw ServeError(fmt::format("cannot bind '{}': {}", address, last_error));

  sockaddr_storage bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&bound), &len);
  const int port = bound.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port)
                                               : ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
  if (on_listening) on_listening(port);

  std::vector<std::thread> connections;
  while (!stop) {
    pollfd p{listener, POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    const int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) continue;
    connections.emplace_back(serve_connection, fd, defaults, std::cref(stop));
  }
  ::close(listener);
  for (auto& t : connections) t.join();
}

LineClient::LineClient(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found);
  if (rc != 0) throw ServeError(fmt::format("cannot resolve '{}': {}", host, ::gai_strerror(rc)));
  for (addrinfo* ai = found; ai != nullptr && fd_ < 0; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd_ >= 0 && ::connect(fd_, ai->ai_addr, ai->ai_addrlen) != 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }
  ::freeaddrinfo(found);
  if (fd_ < 0) throw ServeError(fmt::format("cannot connect to {}:{}", host, port));
}

LineClient::~LineClient() {
  if (fd_ >= 0) ::close(fd_);
}

void LineClient::send_line(const std::string& line) {
  if (!send_all(fd_, line + "\n")) throw ServeError("connection lost while sending");
}

std::string LineClient::read_line() {
  char chunk[4096];
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw ServeError("connection closed by server");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string LineClient::request(const std::string& line) {
  send_line(line);
  return read_line();
}

}  // namespace comex::envd
