#include <benchmark/benchmark.h>

#include "gfree/bigabp.hpp"
#include "gfree/frame_design.hpp"
#include "gfree/harness.hpp"
#include "gfree/init_ce.hpp"

using namespace gfree;

namespace {

Scenario desk(int n) {
  Scenario s;
  s.n_aps = n;
  s.m_users = n;
  s.k_pilot = 8;
  s.k_total = 48;
  s.area_side_m = 1000.0;
  s.receivers = {"bigabp"};
  return s;
}

const FrameMatrix& desk_pilots() {
  static const FrameMatrix f = gaussian_frame(8, 64, 3);
  return f;
}

FrameMatrix pilots_for(int users) {
  CMatrix e = desk_pilots().entries().leftCols(users);
  return FrameMatrix(e);
}

}  // namespace

static void BM_SubproblemSolve(benchmark::State& state) {
  const FrameMatrix f = gaussian_frame(14, 100, 1);
  const QcqpSubproblem p = build_subproblem(f, 0);
  const CsidcoConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(solve_subproblem(p, cfg));
}
BENCHMARK(BM_SubproblemSolve)->Unit(benchmark::kMillisecond);

static void BM_CsidcoSweep(benchmark::State& state) {
  CsidcoConfig cfg;
  cfg.outer_iterations = 1;
  const auto j = static_cast<int>(state.range(0));
  const auto l = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(csidco_design(j, l, cfg));
}
BENCHMARK(BM_CsidcoSweep)->Args({8, 32})->Args({14, 100})->Unit(benchmark::kMillisecond);

static void BM_CoherenceProjection(benchmark::State& state) {
  const FrameMatrix f = gaussian_frame(14, 100, 1);
  for (auto _ : state) benchmark::DoNotOptimize(coherence_projection(f, 0.28, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_CoherenceProjection)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_MmvAmp(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Scenario s = desk(n);
  const TrialContext c = make_trial(s, pilots_for(n), 0.0, 11);
  for (auto _ : state) benchmark::DoNotOptimize(mmv_amp(c.input));
}
BENCHMARK(BM_MmvAmp)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

static void BM_BeliefSweep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Scenario s = desk(n);
  const TrialContext c = make_trial(s, pilots_for(n), 0.0, 11);
  const BeliefState start = initial_state(c.input.pilots, c.input.y.cols(), mmv_amp(c.input));
  const BeliefKnobs knobs;
  for (auto _ : state) {
    BeliefState st = start;
    belief_sweep(c.input.y, st, c.input.gamma, c.input.lambda, c.input.n0, knobs, 1);
    benchmark::DoNotOptimize(st);
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_BeliefSweep)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond)->Complexity();

static void BM_Trial(benchmark::State& state) {
  Scenario s = desk(32);
  s.receivers = {"bigabp", "zf_mmvamp", "gabp_mmvamp", "genie_gabp"};
  const FrameMatrix f = pilots_for(32);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_trial(s, f, 0.0, ++seed));
}
BENCHMARK(BM_Trial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
