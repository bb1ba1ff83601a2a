#include <benchmark/benchmark.h>

#include "dialogxl/ops.hpp"
#include "dialogxl/rng.hpp"
#include "dialogxl/tape.hpp"

using namespace dialogxl;

static void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    Tensor a = Tensor::randn({n, n}, rng, 1.0);
    Tensor b = Tensor::randn({n, n}, rng, 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(matmul(a, b));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

static void BM_SoftmaxRows(benchmark::State& state) {
    Rng rng(2);
    Tensor x = Tensor::randn({32, static_cast<std::size_t>(state.range(0))}, rng, 2.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(softmax_rows(x));
    }
}
BENCHMARK(BM_SoftmaxRows)->Arg(64)->Arg(512);

static void BM_LayerNorm(benchmark::State& state) {
    Rng rng(3);
    Tensor x = Tensor::randn({32, 64}, rng, 1.0);
    Tensor g = Tensor::full({64}, 1.0);
    Tensor b = Tensor::zeros({64});
    for (auto _ : state) {
        benchmark::DoNotOptimize(layer_norm(x, g, b));
    }
}
BENCHMARK(BM_LayerNorm);

static void BM_ForwardBackward(benchmark::State& state) {
    Rng rng(4);
    Tensor x = Tensor::randn({8, 32}, rng, 1.0);
    Tensor w1 = Tensor::randn({32, 128}, rng, 0.1, true);
    Tensor w2 = Tensor::randn({128, 32}, rng, 0.1, true);
    Tensor r = Tensor::randn({8, 32}, rng, 1.0);
    for (auto _ : state) {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = sum(mul(matmul(gelu(matmul(x, w1)), w2), r));
        backward(tape, loss);
        w1.zero_grad();
        w2.zero_grad();
        benchmark::DoNotOptimize(loss);
    }
}
BENCHMARK(BM_ForwardBackward);
