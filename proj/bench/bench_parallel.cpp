// Serial reference vs OpenMP execution of the two Monte-Carlo drivers. Thread count follows
// PSEUDOLAT_THREADS (or the OpenMP default).

#include <benchmark/benchmark.h>

#include "pseudolat/harness.hpp"

using namespace pseudolat;

namespace {

ScenarioConfig scenario(int runs) {
  ScenarioConfig cfg;
  cfg.name = "bench";
  cfg.target.start = {20, -10, 0};
  cfg.runs = runs;
  cfg.base_seed = 5;
  return cfg;
}

WaveformComparisonConfig comparison(int trials) {
  WaveformComparisonConfig cfg;
  cfg.trials = trials;
  cfg.base_seed = 5;
  return cfg;
}

void BM_Scenario(benchmark::State& state, Execution exec) {
  const ScenarioConfig cfg = scenario(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_scenario(cfg, exec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.counters["threads"] = exec == Execution::Serial ? 1 : worker_count();
}

void BM_Waveforms(benchmark::State& state, Execution exec) {
  const WaveformComparisonConfig cfg = comparison(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(compare_waveforms(cfg, exec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.counters["threads"] = exec == Execution::Serial ? 1 : worker_count();
}

}  // namespace

BENCHMARK_CAPTURE(BM_Scenario, serial, Execution::Serial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Scenario, parallel, Execution::Parallel)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Waveforms, serial, Execution::Serial)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Waveforms, parallel, Execution::Parallel)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
