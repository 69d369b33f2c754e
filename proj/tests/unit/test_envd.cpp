#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "comex/envd.hpp"
#include "comex/obsmap.hpp"
#include "comex/policy.hpp"
#include "comex/trace.hpp"

namespace comex::envd {
namespace {

using nlohmann::json;

json request(const char* type, json payload = json::object(), json id = 1) {
  return {{"version", kProtocolVersion}, {"id", id}, {"type", type}, {"payload", std::move(payload)}};
}

std::string error_code(const json& reply) {
  EXPECT_EQ(reply["type"], "error");
  return reply["payload"]["code"].get<std::string>();
}

// Mirrors RandomPolicy on the client side: only the mask is needed.
std::vector<ActionId> random_actions(const json& observations, int n_agents, std::vector<Rng>& streams) {
  std::vector<ActionId> out;
  const RandomPolicy random;
  const int mask_offset = static_cast<int>(observation_size(n_agents));
  for (int i = 0; i < n_agents; ++i) {
    Observation o;
    for (int a = 0; a < kNumActions; ++a)
      if (observations[i][mask_offset + a].get<double>() > 0.5) o.mask.set(a);
    out.push_back(random.act(o, streams[i]));
  }
  return out;
}

TEST(Session, ResetReportsLayoutAndObservations) {
  Session s;
  const json r = s.handle(request("reset", {{"seed", 4}}, "abc"));
  ASSERT_EQ(r["type"], "reset_ok");
  EXPECT_EQ(r["id"], "abc");
  EXPECT_EQ(r["version"], kProtocolVersion);
  const json& p = r["payload"];
  EXPECT_EQ(p["n_agents"], 4);
  EXPECT_EQ(p["observations"].size(), 4u);
  EXPECT_EQ(p["observations"][0].size(), 47u);
  EXPECT_EQ(p["layout"][2]["name"], "net");
  EXPECT_EQ(p["layout"][3]["offset"], 37);
  const WorldState expected = reset_episode(4, EnvConfig{});
  EXPECT_EQ(*s.state(), expected);
}

TEST(Session, StepBeforeResetAndBadMessages) {
  Session s;
  EXPECT_EQ(error_code(s.handle(request("step", {{"actions", {8, 8, 8, 8}}}))), kNoEpisode);
  const json bad = json::parse(s.handle_line("{not json"));
  EXPECT_EQ(error_code(bad), kBadMessage);
  EXPECT_TRUE(bad["id"].is_null());
  EXPECT_EQ(error_code(s.handle({{"id", 3}, {"type", "reset"}})), kBadMessage);
  EXPECT_EQ(error_code(s.handle({{"version", 2}, {"id", 3}, {"type", "reset"}})), kVersionMismatch);
  EXPECT_EQ(error_code(s.handle(request("dance"))), kBadMessage);
  EXPECT_EQ(error_code(s.handle(request("reset", {{"config", {{"rows", 0}}}}))), kBadConfig);
  EXPECT_EQ(error_code(s.handle(request("reset", {{"config", {{"bogus", 1}}}}))), kBadConfig);
  EXPECT_EQ(error_code(s.handle(request("reset", {{"seed", -3}}))), kBadMessage);
  EXPECT_FALSE(s.active());
}

TEST(Session, BadActionLeavesStateUnchanged) {
  Session s;
  ASSERT_EQ(s.handle(request("reset", {{"seed", 1}}))["type"], "reset_ok");
  const WorldState before = *s.state();
  EXPECT_EQ(error_code(s.handle(request("step", {{"actions", {8, 8, 11, 8}}}))), kBadAction);
  EXPECT_EQ(error_code(s.handle(request("step", {{"actions", {8, 8}}}))), kBadAction);
  EXPECT_EQ(error_code(s.handle(request("step", {{"actions", {8, 8, -1, 8}}}))), kBadAction);
  EXPECT_EQ(error_code(s.handle(request("step", {{"actions", {8, 8, "x", 8}}}))), kBadAction);
  EXPECT_EQ(*s.state(), before);
  EXPECT_EQ(s.trace()->steps.size(), 0u);
}

TEST(Session, AllStayJointRewardMinusOneAndDoneAtHorizon) {
  Session s;
  s.handle(request("reset", {{"seed", 2}, {"config", {{"horizon", 3}}}}));
  for (int t = 1; t <= 3; ++t) {
    const json r = s.handle(request("step", {{"actions", {8, 8, 8, 8}}}));
    ASSERT_EQ(r["type"], "step_ok");
    EXPECT_EQ(r["payload"]["joint_reward"], -1.0);
    EXPECT_EQ(r["payload"]["t"], t);
    EXPECT_EQ(r["payload"]["done"], t == 3);
  }
  EXPECT_EQ(error_code(s.handle(request("step", {{"actions", {8, 8, 8, 8}}}))), kEpisodeDone);
  const json c = s.handle(request("close"));
  EXPECT_EQ(c["type"], "close_ok");
  EXPECT_EQ(c["payload"]["steps"], 3);
  EXPECT_TRUE(s.closed());
  EXPECT_EQ(error_code(s.handle(request("reset"))), kBadMessage);
}

TEST(Session, ProtocolEpisodeEqualsInProcessEpisode) {
  const std::uint64_t seed = 17;
  const int steps = 300;
  Session s;
  json obs = s.handle(request("reset", {{"seed", seed}}))["payload"]["observations"];
  std::vector<Rng> streams;
  for (int i = 0; i < 4; ++i) streams.emplace_back(policy_stream_seed(seed, i));
  for (int t = 0; t < steps; ++t) {
    const json r = s.handle(request("step", {{"actions", random_actions(obs, 4, streams)}}));
    ASSERT_EQ(r["type"], "step_ok");
    for (const json& a : r["payload"]["events"]["agents"]) ASSERT_FALSE(a["dangerous"].get<bool>());
    obs = r["payload"]["observations"];
  }
  const json closed = s.handle(request("close", {{"trace", true}}));
  const EpisodeTrace remote = trace_from_json(closed["payload"]["trace"]);
  const std::vector<std::shared_ptr<const Policy>> pols(4, std::make_shared<RandomPolicy>());
  const EpisodeTrace local = run_episode(pols, EnvConfig{}, seed, steps);
  EXPECT_EQ(dump_trace(remote), dump_trace(local));
}

TEST(Serve, LiveServerRoundTrip) {
  std::atomic<bool> stop{false};
  std::atomic<int> port{0};
  std::thread server([&] { serve("127.0.0.1:0", EnvConfig{}, stop, [&](int p) { port = p; }); });
  while (port == 0) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  {
    LineClient client("127.0.0.1", port);
    const json reset = json::parse(client.request(request("reset", {{"seed", 3}}, 7).dump()));
    EXPECT_EQ(reset["type"], "reset_ok");
    EXPECT_EQ(reset["id"], 7);
    // Blank lines are skipped; CRLF is accepted.
    client.send_line("");
    const json step = json::parse(client.request(request("step", {{"actions", {8, 8, 8, 8}}}, 8).dump() + "\r"));
    EXPECT_EQ(step["payload"]["joint_reward"], -1.0);
    const json bad = json::parse(client.request("[1,2"));
    EXPECT_EQ(bad["payload"]["code"], kBadMessage);
    const json close = json::parse(client.request(request("close", json::object(), 9).dump()));
    EXPECT_EQ(close["type"], "close_ok");
  }
  stop = true;
  server.join();
}

TEST(Serve, BadAddressThrows) {
  std::atomic<bool> stop{true};
  EXPECT_THROW(serve("256.1.1.1:0", EnvConfig{}, stop), ServeError);
}

}  // namespace
}  // namespace comex::envd
