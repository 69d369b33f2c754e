#include <gtest/gtest.h>

#include "comex/checkpoint.hpp"
#include "comex/config.hpp"
#include "comex/serialize.hpp"
#include "comex/trace.hpp"
#include "comex/world.hpp"
#include "oracles.hpp"

namespace comex {
namespace {

TEST(ArenaJson, RoundTrip) {
  const Arena a = generate_arena(3, EnvConfig{});
  EXPECT_EQ(arena_from_json(arena_to_json(a)), a);
  const Arena b = arena_from_json(parse_json_text(arena_to_json(a).dump(2)));
  EXPECT_EQ(b, a);
}

TEST(MapJson, RoundTripAndValidation) {
  Rng rng(1);
  const ReconMap m = testing::random_ternary_map(5, 7, rng);
  EXPECT_EQ(map_from_json(map_to_json(m)), m);
  nlohmann::json j = map_to_json(m);
  j["grid"][1][2] = 4;
  EXPECT_THROW(map_from_json(j), ParseError);
  j = map_to_json(m);
  j["grid"].erase(0);
  EXPECT_THROW(map_from_json(j), ParseError);
  EXPECT_THROW(map_from_json(arena_to_json(Arena(2, 2, 0.5, 0.0))), ParseError);
}

TEST(ParseJsonText, ReportsLine) {
  try {
    parse_json_text("{\n  \"a\": 1,\n  \"b\": ]\n}");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 3);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(LoadMapFile, AcceptsArenaAsFullyKnown) {
  const auto path = std::filesystem::temp_directory_path() / "comex_arena_file.json";
  const Arena a = generate_arena(4, EnvConfig{});
  write_text_file(path, arena_to_json(a).dump());
  EXPECT_EQ(load_map_file(path), fully_known(a));
  std::filesystem::remove(path);
  EXPECT_THROW(load_map_file(path), std::runtime_error);
}

TEST(EnvConfigJson, RoundTripAndUnknownKeys) {
  EnvConfig c;
  c.rows = 9;
  c.reward_case = RewardCase::Case1;
  EXPECT_EQ(env_config_from_json(to_json(c)), c);
  EXPECT_EQ(env_config_from_json({{"n_agents", 3}}, c).rows, 9);
  EXPECT_THROW(env_config_from_json({{"rowz", 3}}), ConfigError);
  const EnvConfig d;
  EXPECT_EQ(d.rows, 12);
  EXPECT_EQ(d.obstacle_ratio, 0.1);
  EXPECT_EQ(d.cell_side, 0.5);
  EXPECT_EQ(d.comm_range, 3.2);
  EXPECT_EQ(d.n_agents, 4);
  EXPECT_EQ(d.horizon, 300);
}

TEST(Checkpoint, RoundTripExact) {
  Rng rng(2);
  for (ArchKind kind : {ArchKind::Mlp, ArchKind::Cnn}) {
    const ArchSpec s = testing::toy_arch(kind, 3);
    std::vector<NamedNetwork> nets{{"actor_0", Network::actor(s, rng)}, {"critic", Network::critic(s, rng)}};
    const std::string bytes = encode_checkpoint(nets);
    const auto back = decode_checkpoint(bytes);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].name, "actor_0");
    EXPECT_EQ(back[0].network, nets[0].network);
    EXPECT_EQ(back[1].network, nets[1].network);
    EXPECT_EQ(back[1].network.role(), NetRole::Critic);
    EXPECT_EQ(encode_checkpoint(back), bytes);
  }
}

TEST(Checkpoint, RejectsCorruption) {
  Rng rng(3);
  const std::vector<NamedNetwork> nets{{"a", Network::actor(testing::toy_arch(ArchKind::Mlp, 2), rng)}};
  const std::string bytes = encode_checkpoint(nets);
  EXPECT_THROW(decode_checkpoint("NOTACKPT" + bytes.substr(8)), CheckpointError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 8)), CheckpointError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), CheckpointError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.bin"), CheckpointError);
}

TEST(Trace, JsonRoundTrip) {
  const EpisodeTrace tr = run_episode(make_policies("comm", 4), EnvConfig{}, 12, 120);
  const std::string dump = dump_trace(tr);
  EXPECT_EQ(dump_trace(trace_from_json(parse_json_text(dump))), dump);
  EXPECT_EQ(dump_trace(run_episode(make_policies("comm", 4), EnvConfig{}, 12, 120)), dump);
  EXPECT_NE(dump_trace(run_episode(make_policies("comm", 4), EnvConfig{}, 13, 120)), dump);
}

}  // namespace
}  // namespace comex
