// Microbenchmarks for the hot paths: matrix elements, pulse integration,
// Monte Carlo trials and the scan fit.
#include <benchmark/benchmark.h>

#include <vector>

#include "mbcool/analysis.hpp"
#include "mbcool/dynamics.hpp"
#include "mbcool/fock.hpp"
#include "mbcool/protocol.hpp"

using namespace mbcool;

namespace {

const ModeConfig cfg = default_mode_config();
const RapPulse carrier_pulse{35e-6, 83e3, 200e3, 0};
const RapPulse sideband_pulse{250e-6, 5.8e3, 40e3, +1};

void bm_displacement_element(benchmark::State& state) {
    double acc = 0.0;
    for (auto _ : state) acc += displacement_element(41, 40, 0.094142).imag();
    benchmark::DoNotOptimize(acc);
}
BENCHMARK(bm_displacement_element);

void bm_coupling_ladder(benchmark::State& state) {
    double acc = 0.0;
    for (auto _ : state)
        for (int n = 0; n < 64; ++n) acc += coupling(n, +1, cfg);
    benchmark::DoNotOptimize(acc);
}
BENCHMARK(bm_coupling_ladder);

void bm_thermal_truncated(benchmark::State& state) {
    for (auto _ : state) {
        const ThermalDistribution d = ThermalDistribution::truncated(18.0, 255);
        benchmark::DoNotOptimize(d.probabilities.data());
    }
}
BENCHMARK(bm_thermal_truncated);

void bm_pair_elements(benchmark::State& state) {
    for (auto _ : state) {
        const std::vector<double> f =
            pair_elements(900, cfg.lamb_dicke, Transition::blue_sideband);
        benchmark::DoNotOptimize(f.data());
    }
}
BENCHMARK(bm_pair_elements);

void bm_evolve_carrier_pulse(benchmark::State& state) {
    for (auto _ : state) {
        const TwoLevelAmplitudes end = evolve_two_level(
            carrier_pulse, carrier_pulse.peak_rabi_hz, TwoLevelAmplitudes::ground());
        benchmark::DoNotOptimize(end.population_excited());
    }
}
BENCHMARK(bm_evolve_carrier_pulse);

void bm_evolve_sideband_ladder(benchmark::State& state) {
    const double om = sideband_pulse.peak_rabi_hz *
                      ladder_coupling_scale(18, +1, cfg, SidebandScale::n1_coupling);
    for (auto _ : state) {
        const TwoLevelAmplitudes end =
            evolve_two_level(sideband_pulse, om, TwoLevelAmplitudes::excited());
        benchmark::DoNotOptimize(end.population_excited());
    }
}
BENCHMARK(bm_evolve_sideband_ladder);

void bm_transfer_efficiency_sideband(benchmark::State& state) {
    const ThermalDistribution init = ThermalDistribution::truncated(18.0, 127);
    for (auto _ : state) {
        const double eff = transfer_efficiency(sideband_pulse, init, cfg);
        benchmark::DoNotOptimize(eff);
    }
}
BENCHMARK(bm_transfer_efficiency_sideband)->Unit(benchmark::kMillisecond);

void bm_evolve_full_sideband(benchmark::State& state) {
    for (auto _ : state) {
        const FullState end = evolve_full(sideband_pulse, FullState::basis(64, true, 5),
                                          {-1, 0, +1}, cfg);
        benchmark::DoNotOptimize(end.population_excited());
    }
}
BENCHMARK(bm_evolve_full_sideband)->Unit(benchmark::kMillisecond);

void bm_run_trials(benchmark::State& state) {
    ProtocolConfig pc;
    pc.cycles_m = 2;
    pc.shots = state.range(0);
    pc.rng_seed = 2;
    const TransferModel model = TransferModel::constant_failure(0.05);
    for (auto _ : state) {
        const std::vector<TrialOutcome> out = run_trials(pc, model);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_run_trials)->Arg(10000)->Arg(100000);

void bm_exact_chain(benchmark::State& state) {
    ProtocolConfig pc;
    pc.cycles_m = 3;
    const TransferModel model = TransferModel::constant_failure(0.05);
    for (auto _ : state) {
        const std::vector<ChainLevel> chain = exact_chain(pc, model);
        benchmark::DoNotOptimize(chain.data());
    }
}
BENCHMARK(bm_exact_chain);

void bm_rabi_signal(benchmark::State& state) {
    const ThermalDistribution d = ThermalDistribution::truncated(18.0, 899);
    std::vector<double> times(50);
    for (int i = 0; i < 50; ++i) times[i] = 10e-6 + i * 10e-6;
    for (auto _ : state) {
        const std::vector<double> sig =
            rabi_signal(d.probabilities, Transition::blue_sideband, times, cfg);
        benchmark::DoNotOptimize(sig.data());
    }
}
BENCHMARK(bm_rabi_signal);

RabiScan bench_scan() {
    RabiScan scan;
    scan.transition = Transition::blue_sideband;
    scan.shots_per_point = 900;
    scan.times_s.resize(50);
    for (int i = 0; i < 50; ++i) scan.times_s[i] = 10e-6 + (490e-6) * i / 49.0;
    std::vector<double> pop(600, 0.0);
    pop[0] = 0.49;
    const double r = 18.0 / 19.0;
    double pw = 1.0 - r;
    for (int n = 1; n < 600; ++n) {
        pop[n] = (1.0 - 0.49) * pw;
        pw *= r;
    }
    scan.excitation = rabi_signal(pop, Transition::blue_sideband, scan.times_s, cfg);
    return scan;
}

void bm_fit_rabi(benchmark::State& state) {
    const RabiScan scan = bench_scan();
    FitResult guess;
    guess.p0 = 0.5;
    guess.eta = 0.094;
    guess.nbar_tail = 10.0;
    guess.omega0_hz = 83e3;
    for (auto _ : state) {
        const FitResult fit = fit_rabi(scan, guess);
        benchmark::DoNotOptimize(fit.p0);
    }
}
BENCHMARK(bm_fit_rabi)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
