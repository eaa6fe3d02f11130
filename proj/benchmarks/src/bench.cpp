#include <benchmark/benchmark.h>

#include <vector>

#include "rsgame/discounted.hpp"
#include "rsgame/ergodic.hpp"
#include "rsgame/model.hpp"
#include "rsgame/simulate.hpp"

namespace {

using namespace rsgame;

// fixed 4-state, 2x2-action game with a hash-scrambled but deterministic
// rate/cost fill
GameModel bench_model() {
  const int n = 4, nu = 2;
  GameModel m;
  m.n_states = n;
  m.actions1 = {"a", "b"};
  m.actions2 = {"x", "y"};
  m.rates.n_states = n;
  m.rates.n_u1 = m.rates.n_u2 = nu;
  m.rates.pi.assign(static_cast<std::size_t>(n) * n * nu * nu, 0.0);
  m.cost1.n_states = m.cost2.n_states = n;
  m.cost1.n_u1 = m.cost2.n_u1 = nu;
  m.cost1.n_u2 = m.cost2.n_u2 = nu;
  m.cost1.r.assign(static_cast<std::size_t>(n) * nu * nu, 0.0);
  m.cost2.r.assign(static_cast<std::size_t>(n) * nu * nu, 0.0);

  std::uint64_t s = 0x243F6A8885A308D3ull;
  auto rnd = [&]() {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    return static_cast<double>(s >> 11) * 0x1.0p-53;
  };
  for (int i = 0; i < n; ++i)
    for (int u1 = 0; u1 < nu; ++u1)
      for (int u2 = 0; u2 < nu; ++u2) {
        double row = 0.0;
        for (int j = 0; j < n; ++j)
          if (j != i) {
            double q = 0.2 + rnd();
            m.rates.pi[((static_cast<std::size_t>(i) * n + j) * nu + u1) * nu +
                       u2] = q;
            row += q;
          }
        m.rates.pi[((static_cast<std::size_t>(i) * n + i) * nu + u1) * nu +
                   u2] = -row;
        m.cost1.r[(static_cast<std::size_t>(i) * nu + u1) * nu + u2] = rnd();
        m.cost2.r[(static_cast<std::size_t>(i) * nu + u1) * nu + u2] = rnd();
      }
  m.validate();
  m.rates.compute_M();
  m.cost1.compute_sup();
  m.cost2.compute_sup();
  return m;
}

StationaryProfile uniform_profile(const GameModel& m) {
  return {PolicyColumn(static_cast<std::size_t>(m.n_states),
                       MixedAction::uniform(m.n_u1())),
          PolicyColumn(static_cast<std::size_t>(m.n_states),
                       MixedAction::uniform(m.n_u2()))};
}

void BM_PerronValue(benchmark::State& state) {
  GameModel m = bench_model();
  StationaryProfile prof = uniform_profile(m);
  for (auto _ : state) {
    PerronResult r = perron_value(m, prof, 1, 0.5);
    benchmark::DoNotOptimize(r.rho);
  }
}
BENCHMARK(BM_PerronValue);

void BM_DiscountedHjb(benchmark::State& state) {
  GameModel m = bench_model();
  EventuallyStationaryPolicy opp = EventuallyStationaryPolicy::stationary(
      PolicyColumn(static_cast<std::size_t>(m.n_states),
                   MixedAction::uniform(m.n_u2())),
      0.4);
  GridSpec grid{static_cast<int>(state.range(0))};
  for (auto _ : state) {
    ValueCurve c = solve_discounted_hjb(m, 1, opp, 1.0, 0.4, grid);
    benchmark::DoNotOptimize(c.psi.back()[0]);
  }
}
BENCHMARK(BM_DiscountedHjb)->Arg(64)->Arg(256);

void BM_ErgodicBestResponse(benchmark::State& state) {
  GameModel m = bench_model();
  PolicyColumn opp(static_cast<std::size_t>(m.n_states),
                   MixedAction::uniform(m.n_u2()));
  for (auto _ : state) {
    ErgodicCtmdpResult r = solve_ergodic_ctmdp(m, 1, opp, 0.5);
    benchmark::DoNotOptimize(r.rho);
  }
}
BENCHMARK(BM_ErgodicBestResponse);

void BM_SamplerErgodic(benchmark::State& state) {
  GameModel m = bench_model();
  StationaryProfile prof = uniform_profile(m);
  McOptions opts;
  opts.paths = state.range(0);
  opts.horizon = 50.0;
  opts.seed = 7;
  opts.threads = 1;
  for (auto _ : state) {
    ErgodicMcResult r = estimate_ergodic_cost(m, prof, 0.2, 0.2, opts);
    benchmark::DoNotOptimize(r.rho1.value);
  }
  state.SetItemsProcessed(state.iterations() * opts.paths);
}
BENCHMARK(BM_SamplerErgodic)->Arg(256)->Arg(2048);

}  // namespace

BENCHMARK_MAIN();
