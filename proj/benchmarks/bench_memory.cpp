#include <benchmark/benchmark.h>

#include "dialogxl/memory.hpp"
#include "dialogxl/rng.hpp"

using namespace dialogxl;

static void BM_MemoryUpdateTruncate(benchmark::State& state) {
    const std::size_t d = 32;
    Rng rng(1);
    Tensor h = Tensor::randn({9, d}, rng, 1.0);
    for (auto _ : state) {
        MemoryBank bank(2, d, static_cast<std::size_t>(state.range(0)));
        for (int t = 0; t < 40; ++t) {
            bank.update(0, h, t, t % 2);
            bank.update(1, h, t, t % 2);
            bank.truncate();
        }
        benchmark::DoNotOptimize(bank.length());
    }
}
BENCHMARK(BM_MemoryUpdateTruncate)->Arg(100)->Arg(1000);

static void BM_SegmentUpdate(benchmark::State& state) {
    const std::size_t d = 32;
    Rng rng(2);
    Tensor h = Tensor::randn({12, d}, rng, 1.0);
    std::vector<std::uint8_t> pad = {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
    for (auto _ : state) {
        SegmentMemory seg(2, d, static_cast<std::size_t>(state.range(0)));
        for (int t = 0; t < 40; ++t) {
            seg.update(0, h, pad);
            seg.update(1, h, pad);
            seg.truncate();
        }
        benchmark::DoNotOptimize(seg.pad_count());
    }
}
BENCHMARK(BM_SegmentUpdate)->Arg(100)->Arg(1000);

static void BM_SnapshotJson(benchmark::State& state) {
    const std::size_t d = 16;
    Rng rng(3);
    Tensor h = Tensor::randn({8, d}, rng, 1.0);
    MemoryBank bank(2, d, MemoryBank::kUnbounded);
    for (int t = 0; t < 30; ++t) {
        bank.update(0, h, t, t % 3);
        bank.update(1, h, t, t % 3);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(bank.snapshot_json(true));
    }
}
BENCHMARK(BM_SnapshotJson);

BENCHMARK_MAIN();
