#include <benchmark/benchmark.h>

#include "comex/frontier.hpp"
#include "comex/network.hpp"
#include "comex/obsmap.hpp"
#include "comex/policy.hpp"
#include "comex/world.hpp"

namespace {

using namespace comex;

// Mid-episode state: greedy agents after a fixed number of steps.
WorldState warmed_state(int steps) {
  WorldState s = reset_episode(1, EnvConfig{});
  GreedyFrontierPolicy greedy;
  Rng rng(1);
  for (int t = 0; t < steps; ++t) {
    std::vector<ActionId> a;
    for (int i = 0; i < s.n_agents(); ++i) a.push_back(greedy.act(build_observation(s, i), rng));
    step(s, a);
  }
  return s;
}

void BM_FprFeatures(benchmark::State& st) {
  const WorldState s = warmed_state(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(fpr_features(s.maps[0], s.positions[0]));
}
BENCHMARK(BM_FprFeatures)->Arg(0)->Arg(20)->Arg(80);

void BM_BuildObservation(benchmark::State& st) {
  const WorldState s = warmed_state(20);
  for (auto _ : st) benchmark::DoNotOptimize(build_observation(s, 0));
}
BENCHMARK(BM_BuildObservation);

void BM_Step(benchmark::State& st) {
  WorldState s = reset_episode(2, EnvConfig{});
  Rng rng(2);
  RandomPolicy random;
  std::vector<ActionId> a(s.n_agents());
  for (auto _ : st) {
    for (int i = 0; i < s.n_agents(); ++i) a[i] = random.act(build_observation(s, i), rng);
    benchmark::DoNotOptimize(step(s, a));
  }
}
BENCHMARK(BM_Step);

void BM_ActorForward(benchmark::State& st) {
  Rng rng(3);
  ArchSpec spec;
  spec.kind = st.range(0) == 0 ? ArchKind::Mlp : ArchKind::Cnn;
  const Network actor = Network::actor(spec, rng);
  const nn::Matrix x = nn::Matrix::Random(actor.input_size(), st.range(1));
  for (auto _ : st) benchmark::DoNotOptimize(actor.forward(x));
  st.SetItemsProcessed(st.iterations() * st.range(1));
}
BENCHMARK(BM_ActorForward)->Args({0, 1})->Args({0, 200})->Args({1, 1})->Args({1, 200});

}  // namespace

BENCHMARK_MAIN();
