#include <benchmark/benchmark.h>

#include "diqkd/bff_entropy.hpp"
#include "diqkd/estimation.hpp"
#include "diqkd/npa.hpp"
#include "diqkd/preprocess.hpp"
#include "diqkd/reference_data.hpp"
#include "diqkd/spdc_model.hpp"

using namespace diqkd;

namespace {

Behavior table_iv_20m() { return reference::estimated_behavior(reference::fiber_run(20)); }

void BM_ModelBehavior(benchmark::State& state) {
  SpdcParams p = reference::model_20m();
  p.max_pairs = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(behavior_from_model(p));
}
BENCHMARK(BM_ModelBehavior)->Arg(1)->Arg(3)->Arg(8);

void BM_Preprocess(benchmark::State& state) {
  const OutcomeDist key = table_iv_20m().setting(0, 2);
  for (auto _ : state) benchmark::DoNotOptimize(process(key, {0.96, 0.13}));
}
BENCHMARK(BM_Preprocess);

void BM_BuildBasis(benchmark::State& state) {
  const auto level = npa::LevelSpec::parse("2+ABZ+AZZ");
  for (auto _ : state) benchmark::DoNotOptimize(npa::build_basis({2, 3, 2}, level));
}
BENCHMARK(BM_BuildBasis);

void BM_Projection(benchmark::State& state) {
  const Behavior raw = from_counts(reference::fiber_run(20).counts);
  for (auto _ : state) benchmark::DoNotOptimize(project_to_quantum(raw));
}
BENCHMARK(BM_Projection)->Unit(benchmark::kMillisecond);

// One node SDP per quadrature point beyond the last.
void BM_EntropyBound(benchmark::State& state) {
  const Behavior b = table_iv_20m();
  BffConfig c;
  c.m = static_cast<int>(state.range(0));
  c.level = npa::LevelSpec::parse("2");
  for (auto _ : state) benchmark::DoNotOptimize(entropy_bound(b, Scenario{}, {0.96, 0.13}, c));
}
BENCHMARK(BM_EntropyBound)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
