#include "doat/bloom.hpp"
#include "doat/delay_space.hpp"
#include "doat/rng.hpp"
#include "doat/sfc.hpp"

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

namespace {

void BM_RingCoordinate(benchmark::State& state) {
    doat::CurveParams params;
    params.kind = state.range(0) == 0 ? doat::CurveKind::hilbert : doat::CurveKind::moore;
    const auto box = doat::BoundingBox::cube(2, -100, 100);
    const auto pts = doat::generate_uniform(4096, box, 1);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(doat::ring_coordinate(pts[i++ & 4095], box, params));
    }
}
BENCHMARK(BM_RingCoordinate)->Arg(0)->Arg(1);

void BM_BloomInsert(benchmark::State& state) {
    std::vector<doat::GroupId> ids;
    for (int i = 0; i < 1024; ++i) {
        ids.emplace_back("group-" + std::to_string(i));
    }
    doat::BloomFilter f;
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(f.insert(ids[i++ & 1023]));
    }
}
BENCHMARK(BM_BloomInsert);

void BM_BloomContains(benchmark::State& state) {
    doat::BloomFilter f;
    std::vector<doat::GroupId> ids;
    for (int i = 0; i < 1024; ++i) {
        ids.emplace_back("group-" + std::to_string(i));
        if (i % 2 == 0) {
            f.insert(ids.back());
        }
    }
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(f.contains(ids[i++ & 1023]));
    }
}
BENCHMARK(BM_BloomContains);

void BM_BloomMerge(benchmark::State& state) {
    doat::BloomFilter a(doat::BloomParams{static_cast<std::uint32_t>(state.range(0)), 7});
    doat::BloomFilter b(a.params());
    doat::Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        b.insert(doat::GroupId("g" + std::to_string(rng.next_u64())));
    }
    for (auto _ : state) {
        a.merge(b);
        benchmark::DoNotOptimize(a);
    }
}
BENCHMARK(BM_BloomMerge)->Arg(1024)->Arg(8192);

void BM_AveragePairwiseDelay(benchmark::State& state) {
    const auto pts = doat::generate_uniform(static_cast<std::size_t>(state.range(0)),
                                            doat::BoundingBox::cube(2, -100, 100), 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(doat::average_pairwise_delay(pts));
    }
}
BENCHMARK(BM_AveragePairwiseDelay)->Arg(1000)->Arg(3000)->Unit(benchmark::kMillisecond);

}  // namespace
