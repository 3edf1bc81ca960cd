// Microbenchmarks for the per-step kernels that dominate ensemble runtime:
// the raw counter-based generator, the banded drift/measurement steps at a
// few cutoffs, one RK4 step of the unconditional integrator, and a full
// counting trajectory as the end-to-end anchor.
//
// Run with:  build/benchmarks/qfilt_bench --benchmark_min_time=0.2s

#include <benchmark/benchmark.h>

#include "qfilt/counting.hpp"
#include "qfilt/diffusion.hpp"
#include "qfilt/fock.hpp"
#include "qfilt/master.hpp"
#include "qfilt/model.hpp"
#include "qfilt/rng.hpp"

using namespace qfilt;

namespace {

SystemModel bench_model(int dim, bool oscillator) {
    SystemModel m;
    m.cutoff = FockCutoff(dim);
    m.omega = 1.0;
    m.mu = 1.0;
    m.drive.lambda = 0.5;
    m.drive.omega_f = 1.0;
    m.initial = coherent_state(m.cutoff, Complex(0.5, 0.0));
    if (oscillator) {
        m.lo.enabled = true;
        m.lo.epsilon = 0.3;
    }
    return m;
}

void bm_philox_u64(benchmark::State& state) {
    CounterRng rng(1, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rng.next_u64());
    }
}
BENCHMARK(bm_philox_u64);

void bm_gaussian(benchmark::State& state) {
    CounterRng rng(1, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rng.next_gaussian());
    }
}
BENCHMARK(bm_gaussian);

void bm_pure_drift_step(benchmark::State& state) {
    const SystemModel m = bench_model(int(state.range(0)), false);
    PureState s = std::get<PureState>(m.initial);
    double t = 0.0;
    for (auto _ : state) {
        s = nonlinear_drift_step(s, m, t, 1e-3);
        t += 1e-3;
        benchmark::DoNotOptimize(s.amplitudes.data());
    }
}
BENCHMARK(bm_pure_drift_step)->Arg(8)->Arg(16)->Arg(32);

void bm_sme_step(benchmark::State& state) {
    const SystemModel m = bench_model(int(state.range(0)), false);
    DensityMatrix rho = projector(std::get<PureState>(m.initial));
    double t = 0.0;
    for (auto _ : state) {
        rho = sme_counting_step(rho, m, t, 1e-3, 0);
        t += 1e-3;
        benchmark::DoNotOptimize(rho.data());
    }
}
BENCHMARK(bm_sme_step)->Arg(8)->Arg(16);

void bm_diffusion_step(benchmark::State& state) {
    const SystemModel m = bench_model(int(state.range(0)), true);
    PureState s = std::get<PureState>(m.initial);
    CounterRng rng(3, 4);
    double t = 0.0;
    for (auto _ : state) {
        s = diffusion_pure_step(s, m, t, 1e-3, 0.0316 * rng.next_gaussian());
        t += 1e-3;
        benchmark::DoNotOptimize(s.amplitudes.data());
    }
}
BENCHMARK(bm_diffusion_step)->Arg(8)->Arg(16)->Arg(32);

void bm_rk4_master_step(benchmark::State& state) {
    const SystemModel m = bench_model(int(state.range(0)), false);
    // One full integration per iteration over a handful of steps keeps the
    // setup cost (CavityOps build) amortized realistically.
    for (auto _ : state) {
        MasterRun run = integrate_master(m, 16e-3, 1e-3, 16);
        benchmark::DoNotOptimize(run.states.back().data());
    }
    state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(bm_rk4_master_step)->Arg(8)->Arg(16)->Arg(32);

void bm_counting_trajectory(benchmark::State& state) {
    const SystemModel m = bench_model(int(state.range(0)), false);
    TrajectoryParams p;
    p.t_final = 1.0;
    p.dt = 1e-3;
    std::uint64_t index = 0;
    for (auto _ : state) {
        p.trajectory_index = index++;
        CountingTrajectory traj = simulate_counting(m, p);
        benchmark::DoNotOptimize(traj.final_state.amplitudes.data());
    }
    state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(bm_counting_trajectory)->Arg(8)->Arg(16);

void bm_diffusion_trajectory(benchmark::State& state) {
    const SystemModel m = bench_model(int(state.range(0)), true);
    TrajectoryParams p;
    p.t_final = 1.0;
    p.dt = 1e-3;
    p.record_noise = false;
    std::uint64_t index = 0;
    for (auto _ : state) {
        p.trajectory_index = index++;
        DiffusionTrajectory traj = simulate_diffusion(m, p);
        benchmark::DoNotOptimize(traj.final_state.amplitudes.data());
    }
    state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(bm_diffusion_trajectory)->Arg(8)->Arg(16);

}  // namespace

BENCHMARK_MAIN();
