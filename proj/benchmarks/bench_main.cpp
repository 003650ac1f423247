#include <benchmark/benchmark.h>

#include <vector>

#include "aalen/aggregation.hpp"
#include "aalen/erm.hpp"
#include "aalen/risk.hpp"
#include "aalen/simulate.hpp"
#include "aalen/single_index.hpp"

using namespace aalen;

namespace {

Dataset survival_data(std::size_t d, std::size_t n) {
  ScenarioConfig c;
  c.kind = ScenarioKind::kCensoredSurvival;
  c.d = d;
  c.n = n;
  c.seed = 1;
  c.truth = {{"family", "smooth_separable"}};
  c.censoring = {{"family", "constant"}, {"value", 0.3}};
  return simulate(c);
}

SieveSpec spec(std::size_t d, int m) {
  SieveSpec s;
  s.family = SieveFamily::kPiecewisePoly;
  s.d = d;
  s.m.assign(d + 1, m);
  s.l.assign(d + 1, 1);
  s.clip = 2.0;
  return s;
}

void BM_Simulate(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(survival_data(2, static_cast<std::size_t>(state.range(0))));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Simulate)->Arg(1000)->Arg(10000);

void BM_AssembleGram(benchmark::State& state) {
  const Dataset data = survival_data(2, 4000);
  const SieveSpec s = spec(2, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(assemble_system(data, s));
}
BENCHMARK(BM_AssembleGram)->DenseRange(1, 3);

void BM_Fit(benchmark::State& state) {
  const Dataset data = survival_data(1, 4000);
  const SieveSpec s = spec(1, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit(data, s, 0.0, 1e-3));
}
BENCHMARK(BM_Fit)->DenseRange(1, 5, 2);

void BM_FitCached(benchmark::State& state) {
  const Dataset data = survival_data(1, 4000);
  const TimeMomentCache cache(data);
  const SieveSpec s = spec(1, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit(data, s, 0.0, 1e-3, kDefaultQuadNodes, &cache));
}
BENCHMARK(BM_FitCached)->DenseRange(1, 5, 2);

void BM_EmpiricalRisk(benchmark::State& state) {
  const Dataset data = survival_data(1, 4000);
  const IntensityModel model = fit(data, spec(1, 3), 0.0, 1e-3).model();
  for (auto _ : state) benchmark::DoNotOptimize(empirical_risk(data, model));
}
BENCHMARK(BM_EmpiricalRisk);

void BM_Aggregate(benchmark::State& state) {
  const Dataset training = survival_data(1, 2000);
  const Dataset learning = survival_data(1, 2000);
  Dictionary dict;
  for (const SieveSpec& s : build_collection(2000, 1, SieveFamily::kPiecewisePoly, {1, 1}, 2.0).specs) {
    dict.push_back({fit(training, s, 0.0, 1e-3).model(), {}});
  }
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(dict, learning, 4.0));
}
BENCHMARK(BM_Aggregate);

void BM_BuildNet(benchmark::State& state) {
  const double delta = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_net(3, delta));
}
BENCHMARK(BM_BuildNet)->Arg(4)->Arg(8);

void BM_SimDictionary(benchmark::State& state) {
  const Dataset training = survival_data(3, 2000);
  const SphereNet net = build_net(3, 0.4);
  const ModelCollection coll = build_collection(2000, 1, SieveFamily::kPiecewisePoly, {1, 1}, 2.0);
  const TimeMomentCache cache(training);
  for (auto _ : state) benchmark::DoNotOptimize(build_sim_dictionary(training, net, coll, 0.0, 1e-3, 1, &cache));
}
BENCHMARK(BM_SimDictionary)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
