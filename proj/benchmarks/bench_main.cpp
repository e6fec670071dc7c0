#include <benchmark/benchmark.h>

#include <algorithm>

#include "nlosloc/baseline.hpp"
#include "nlosloc/em_centralized.hpp"
#include "nlosloc/em_distributed.hpp"
#include "nlosloc/harness.hpp"
#include "nlosloc/relay_sim.hpp"

using namespace nlos;

namespace {

const ScenarioConfig& layout() {
  static const ScenarioConfig cfg = default_layout(10.0, 7.0);
  return cfg;
}

Problem layout_problem(std::uint64_t seed) {
  const ScenarioConfig& c = layout();
  return make_problem(c.scenario, synthesize_measurements(c.scenario, seed, c.noise));
}

void BM_EStep(benchmark::State& state) {
  const Problem p = layout_problem(1);
  const ParamEstimate x = clamp_to_boxes(p, initial_estimate(p, 1, 0));
  for (auto _ : state) benchmark::DoNotOptimize(e_step(p, x));
}
BENCHMARK(BM_EStep);

void BM_MStep(benchmark::State& state) {
  const Problem p = layout_problem(1);
  const ParamEstimate x = clamp_to_boxes(p, initial_estimate(p, 1, 0));
  const PosteriorWeights w = e_step(p, x);
  EMOptions opts;
  opts.grid = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(m_step(w, p, x, opts));
}
BENCHMARK(BM_MStep)->Arg(64)->Arg(256);

void BM_CentralizedRun(benchmark::State& state) {
  const Problem p = layout_problem(2);
  const EMOptions& opts = layout().estimators.em;
  for (auto _ : state) benchmark::DoNotOptimize(multi_start(p, 1, 2, opts));
}
BENCHMARK(BM_CentralizedRun)->Unit(benchmark::kMillisecond);

void BM_LocalMStep(benchmark::State& state) {
  const Problem p = layout_problem(3);
  const LocalProblem lp = local_problem(p, 1);
  NodeState st;
  st.index = 1;
  st.q = layout().scenario.target;
  st.theta1 = p.measurements.aoa[0];
  st.theta_i = p.measurements.aoa[1];
  const LocalExpectation e = local_expectation(st, lp);
  st.stat = e.mean;
  for (auto _ : state) benchmark::DoNotOptimize(local_m_step(st, lp, e.rho));
}
BENCHMARK(BM_LocalMStep);

void BM_GossipRound(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  std::vector<NodeState> st(m);
  const Topology t = Topology::complete(m);
  CounterRng rng(4);
  for (auto _ : state) {
    gossip_round(st, sample_pairwise_matrix(t, rng));
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_GossipRound)->Arg(4)->Arg(8);

void BM_DistributedSolve(benchmark::State& state) {
  const Problem p = layout_problem(5);
  const ScenarioConfig& c = layout();
  for (auto _ : state) benchmark::DoNotOptimize(solve_distributed(p, c.gossip, c.estimators.schedule, c.estimators.dist));
}
BENCHMARK(BM_DistributedSolve)->Unit(benchmark::kMillisecond);

void BM_TdoaOnly(benchmark::State& state) {
  const Problem p = layout_problem(6);
  for (auto _ : state) benchmark::DoNotOptimize(solve_tdoa_only(p.nodes, p.measurements.tdoa));
}
BENCHMARK(BM_TdoaOnly)->Unit(benchmark::kMillisecond);

void BM_AmbiguityPeak(benchmark::State& state) {
  const SourceSignal s = generate_source(1e-3, 100e-9, 1e6, 7);
  SampledSignal b = s.base;
  std::rotate(b.samples.begin(), b.samples.begin() + 3, b.samples.end());
  for (auto _ : state) benchmark::DoNotOptimize(ambiguity_peak(s.base, b, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_AmbiguityPeak)->Arg(1)->Arg(10)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
