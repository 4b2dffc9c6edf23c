#include "doat/experiments.hpp"
#include "doat/overlay.hpp"
#include "doat/rng.hpp"

#include <benchmark/benchmark.h>

namespace {

doat::Scenario scenario(std::size_t n, double density) {
    doat::Scenario s;
    s.dataset.n = n;
    s.density = density;
    return s;
}

void BM_OverlayBuild(benchmark::State& state) {
    const auto s = scenario(static_cast<std::size_t>(state.range(0)), 0.05);
    for (auto _ : state) {
        benchmark::DoNotOptimize(doat::prepare_overlay(s));
    }
}
BENCHMARK(BM_OverlayBuild)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond)->Iterations(2);

void BM_ResolveTarget(benchmark::State& state) {
    const auto prep = doat::prepare_overlay(scenario(1000, 0.05));
    doat::Rng rng(3);
    for (auto _ : state) {
        const auto start = static_cast<std::uint32_t>(rng.below(1000));
        benchmark::DoNotOptimize(prep.overlay->resolve_target(start, doat::RingCoord(rng.uniform01())));
    }
}
BENCHMARK(BM_ResolveTarget);

void BM_SynchronousRun(benchmark::State& state) {
    const auto s = scenario(1000, static_cast<double>(state.range(0)) / 100.0);
    const auto prep = doat::prepare_overlay(s);
    for (auto _ : state) {
        benchmark::DoNotOptimize(doat::run_synchronous(s, prep));
    }
}
BENCHMARK(BM_SynchronousRun)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond)->Iterations(2);

}  // namespace
