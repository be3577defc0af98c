#include <benchmark/benchmark.h>

#include <vector>

#include "halluc/estimators.hpp"
#include "halluc/instances.hpp"
#include "halluc/learners.hpp"

using namespace halluc;

namespace {

Execution exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

void label(benchmark::State& state) { state.SetLabel(state.range(0) == 0 ? "serial" : "parallel"); }

void BM_BlockedSum(benchmark::State& state) {
  const std::size_t n = 4'000'000;
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = 1.0 / static_cast<double>(i + 1);
  for (auto _ : state) {
    auto s = blocked_sum<1>(n, [&](std::size_t i, std::span<CompensatedSum> acc) { acc[0].add(xs[i]); },
                            exec_of(state));
    benchmark::DoNotOptimize(s);
  }
  label(state);
}
BENCHMARK(BM_BlockedSum)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MainBoundSuite(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(verify_main_bound(1000, 1, exec_of(state)));
  label(state);
}
BENCHMARK(BM_MainBoundSuite)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MultipleChoiceSuite(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(verify_multiple_choice(500, 1, exec_of(state)));
  label(state);
}
BENCHMARK(BM_MultipleChoiceSuite)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ArbitraryFactsTrials(benchmark::State& state) {
  ArbitraryFactsTrialConfig c;
  c.n_prompts = 200'000;
  c.n = 40'000;
  c.trials = 100;
  for (auto _ : state) benchmark::DoNotOptimize(run_arbitrary_facts_trials(c, calibrated_memorizer, exec_of(state)));
  label(state);
}
BENCHMARK(BM_ArbitraryFactsTrials)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ZipfConcentration(benchmark::State& state) {
  ZipfConfig c;
  c.trials = 200;
  for (auto _ : state) benchmark::DoNotOptimize(verify_gt_concentration(c, exec_of(state)));
  label(state);
}
BENCHMARK(BM_ZipfConcentration)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// Single full-size trial: world, training sample, memorizer and bound terms.
void BM_FullScaleTrialPieces(benchmark::State& state) {
  ArbitraryFactsSpec s;
  s.n_prompts = 5'000'000;
  s.response_set_size = 366;
  for (auto _ : state) {
    const World w = build_arbitrary_facts(s);
    const TrainingSet t = sample_training(w, 1'000'000, 2);
    const ConditionalModel q = calibrated_memorizer(w, t);
    benchmark::DoNotOptimize(error_rate(q, truth_partition(w), w.mu));
  }
}
BENCHMARK(BM_FullScaleTrialPieces)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
