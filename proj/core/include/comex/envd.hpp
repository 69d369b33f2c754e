#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "comex/config.hpp"
#include "comex/trace.hpp"
#include "comex/world.hpp"

namespace comex::envd {

inline constexpr int kProtocolVersion = 1;

// Error codes sent in `error` replies.
inline constexpr const char* kBadMessage = "bad_message";
inline constexpr const char* kBadAction = "bad_action";
inline constexpr const char* kBadConfig = "bad_config";
inline constexpr const char* kNoEpisode = "no_episode";
inline constexpr const char* kEpisodeDone = "episode_done";
inline constexpr const char* kVersionMismatch = "version_mismatch";

struct ProtocolError : std::runtime_error {
  ProtocolError(std::string code, const std::string& message) : std::runtime_error(message), code(std::move(code)) {}
  std::string code;
};

// Flat per-agent observation: fov | fpr | net | mask.
nlohmann::json observation_layout(int n_agents);
nlohmann::json observation_payload(const WorldState& state);

// One client's episode state. Transport-free so it can be driven directly.
class Session {
 public:
  explicit Session(EnvConfig defaults = {});

  // Parses one request line and returns the reply line (no newline).
  std::string handle_line(const std::string& line);
  nlohmann::json handle(const nlohmann::json& request);

  bool closed() const { return closed_; }
  bool active() const { return state_.has_value(); }
  bool done() const;
  const WorldState* state() const { return state_ ? &*state_ : nullptr; }
  const EpisodeTrace* trace() const { return recorder_ ? &recorder_->trace() : nullptr; }

 private:
  nlohmann::json on_reset(const nlohmann::json& payload);
  nlohmann::json on_step(const nlohmann::json& payload);
  nlohmann::json on_close(const nlohmann::json& payload);

  EnvConfig defaults_;
  std::optional<WorldState> state_;
  std::optional<TraceRecorder> recorder_;
  bool closed_ = false;
};

struct ServeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Accepts "host:port", ":port" or "port". Port 0 picks a free port, reported
// through `on_listening`. Returns once `stop` becomes true.
void serve(const std::string& address, const EnvConfig& defaults, const std::atomic<bool>& stop,
           const std::function<void(int port)>& on_listening = {});

// Blocking newline-delimited client, used by tests and tools.
class LineClient {
 public:
  LineClient(const std::string& host, int port);
  ~LineClient();
  LineClient(const LineClient&) = delete;
  LineClient& operator=(const LineClient&) = delete;

  void send_line(const std::string& line);
  std::string read_line();
  std::string request(const std::string& line);

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace comex::envd
