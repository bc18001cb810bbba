#include "othr/ecm.hpp"
#include "othr/sim.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace othr;

namespace {

void BM_LgbpTable2Lattice(benchmark::State& state) {
  const ScenarioConfig sc;
  const ScenarioModels models(sc);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> node(0, models.field.size() - 1);
  CanonicalUpdates updates;
  for (int i = 0; i < static_cast<int>(state.range(0)); ++i) {
    updates.add(RadarCanonicalTerm{node(rng), node(rng), 0.01, 0.01, -0.002, 1.5, 2.5});
  }
  const PosteriorField post = assemble_posterior(models.field, updates);
  for (auto _ : state) benchmark::DoNotOptimize(lgbp(post, {1000, 1e-8, 0.0}));
}
BENCHMARK(BM_LgbpTable2Lattice)->Arg(0)->Arg(20)->Arg(80)->Unit(benchmark::kMicrosecond);

void BM_DenseMarginals(benchmark::State& state) {
  const ScenarioModels models{ScenarioConfig{}};
  const Eigen::MatrixXd Q(models.field.precision);
  for (auto _ : state) benchmark::DoNotOptimize(dense_marginals(Q, models.field.potential));
}
BENCHMARK(BM_DenseMarginals)->Unit(benchmark::kMicrosecond);

// Fully shared gates: every slot of every target sees every measurement.
void BM_EnumerateEvents(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  const int M = static_cast<int>(state.range(1));
  GateResult g;
  g.gates.resize(static_cast<std::size_t>(L));
  for (auto& t : g.gates) {
    for (ModeGate& mg : t) {
      mg.available = true;
      mg.probability = 0.9973;
      mg.volume = 1.0;
      for (int j = 0; j < M; ++j) mg.measurements.push_back(j);
    }
  }
  std::size_t count = 0;
  for (auto _ : state) {
    const auto events = enumerate_events(g, 10'000'000);
    count = events.size();
    benchmark::DoNotOptimize(events.data());
  }
  state.counters["events"] = static_cast<double>(count);
}
BENCHMARK(BM_EnumerateEvents)->Args({1, 4})->Args({1, 8})->Args({2, 4})->Args({2, 6})
    ->Unit(benchmark::kMicrosecond);

void BM_RunWindow(benchmark::State& state) {
  ScenarioConfig sc;
  sc.scans = static_cast<int>(state.range(0));
  const ScenarioModels models(sc);
  const Scenario scenario = simulate(sc, models);
  EcmConfig config;
  config.association = models.association;
  const std::vector<FilterState> prior = initialize(initial_filter_states(sc), models.motion);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_window(models.view(), config, scenario.scans, prior));
  }
}
BENCHMARK(BM_RunWindow)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
