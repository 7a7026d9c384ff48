#include <random>

#include <benchmark/benchmark.h>

#include "fourierlab/collision.hpp"
#include "fourierlab/linop.hpp"
#include "fourierlab/sde.hpp"

using namespace fl;

namespace {

LatticeSpec spec(int n, int m, int dim) {
    LatticeSpec s;
    s.n = n;
    s.m_transverse = m;
    s.dim = dim;
    s.lambda = 0.1;
    return with_defaults(s);
}

void BM_collision_field(benchmark::State& st) {
    const Grid g(spec(static_cast<int>(st.range(0)), 1, 1));
    const CorrelationField w = random_field(g, 1);
    KernelConfig kc;
    kc.epsilon = g.spec().epsilon;
    const std::vector<int> slots = g.slots_at(0);
    for (auto _ : st) benchmark::DoNotOptimize(collision_field(g, w.Q, w.J, kc, &slots));
}
BENCHMARK(BM_collision_field)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_build_Lp(benchmark::State& st) {
    const Grid g(spec(static_cast<int>(st.range(0)), 1, 1));
    LinopConfig lc;
    lc.epsilon = g.spec().epsilon;
    for (auto _ : st) benchmark::DoNotOptimize(build_Lp(g, 0, 1.0, lc));
}
BENCHMARK(BM_build_Lp)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_sde_step(benchmark::State& st) {
    const LatticeSpec s = st.range(1) == 1 ? spec(static_cast<int>(st.range(0)), 1, 1)
                                           : spec(static_cast<int>(st.range(0)), 4, 3);
    SimConfig c;
    c.dt = 0.02;
    Stepper stepper(s, c);
    PhaseState ps = harmonic_gibbs_state(s, 1.0, 3);
    std::mt19937_64 rng(5);
    for (auto _ : st) stepper.step(ps, rng);
    st.SetItemsProcessed(st.iterations() * stepper.lattice().volume());
}
BENCHMARK(BM_sde_step)->Args({16, 1})->Args({64, 1})->Args({4, 3});

}  // namespace

BENCHMARK_MAIN();
