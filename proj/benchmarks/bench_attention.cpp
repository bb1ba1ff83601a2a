#include <benchmark/benchmark.h>

#include "dialogxl/attention.hpp"
#include "dialogxl/masks.hpp"
#include "dialogxl/rng.hpp"

using namespace dialogxl;

namespace {

std::vector<MemSlotMeta> make_meta(int utterances, int tokens_each, int speakers, Rng& rng) {
    std::vector<MemSlotMeta> meta;
    for (int u = 0; u < utterances; ++u) {
        const int sp = rng.uniform_int(0, speakers - 1);
        for (int k = 0; k < tokens_each; ++k) meta.push_back({u, sp});
    }
    return meta;
}

}  // namespace

static void BM_BuildMaskSet(benchmark::State& state) {
    Rng rng(1);
    const int utterances = static_cast<int>(state.range(0));
    const auto meta = make_meta(utterances, 6, 3, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_mask_set(8, meta, 2, utterances, 1));
    }
}
BENCHMARK(BM_BuildMaskSet)->Arg(4)->Arg(16)->Arg(64);

static void BM_MaskOracle(benchmark::State& state) {
    Rng rng(2);
    std::vector<UtteranceSketch> prefix;
    for (int u = 0; u < state.range(0); ++u)
        prefix.push_back({static_cast<std::size_t>(rng.uniform_int(2, 8)), rng.uniform_int(0, 2)});
    for (auto _ : state) {
        benchmark::DoNotOptimize(mask_oracle(prefix, static_cast<int>(prefix.size()) - 1, 2));
    }
}
BENCHMARK(BM_MaskOracle)->Arg(8)->Arg(32);

static void BM_RelPosAttention(benchmark::State& state) {
    Rng rng(3);
    const std::size_t mem = static_cast<std::size_t>(state.range(0));
    const std::size_t n_q = 9, dh = 8;
    Tensor q = Tensor::randn({n_q, dh}, rng, 1.0);
    Tensor k = Tensor::randn({mem + n_q, dh}, rng, 1.0);
    Tensor v = Tensor::randn({mem + n_q, dh}, rng, 1.0);
    RelPosHeadParams rel{Tensor::randn({32, dh}, rng, 0.3), Tensor::randn({dh}, rng, 0.3),
                         Tensor::randn({dh}, rng, 0.3)};
    MaskMatrix mask;
    mask.query_rows = n_q;
    mask.key_cols = mem + n_q;
    mask.masked.assign(n_q * (mem + n_q), 0);
    Tensor enc = sinusoid_encoding(mem + n_q + 1, 32);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rel_pos_attention(q, k, v, mask, rel, enc));
    }
}
BENCHMARK(BM_RelPosAttention)->Arg(32)->Arg(128)->Arg(512);

static void BM_DialogLayer(benchmark::State& state) {
    Rng rng(4);
    const std::size_t d = 32, n_t = 8;
    LayerParams p;
    for (HeadType t : {HeadType::global, HeadType::local, HeadType::speaker, HeadType::listener}) {
        AttentionHeadParams h;
        h.type = t;
        h.wq = Tensor::randn({d, d / 4}, rng, 0.2);
        h.wk = Tensor::randn({d, d / 4}, rng, 0.2);
        h.wv = Tensor::randn({d, d / 4}, rng, 0.2);
        h.rel.wkr = Tensor::randn({d, d / 4}, rng, 0.2);
        h.rel.u = Tensor::randn({d / 4}, rng, 0.2);
        h.rel.v = Tensor::randn({d / 4}, rng, 0.2);
        p.heads.push_back(std::move(h));
    }
    p.ln_gain = Tensor::full({d}, 1.0);
    p.ln_bias = Tensor::zeros({d});
    p.ff_w1 = Tensor::randn({d, 4 * d}, rng, 0.2);
    p.ff_b1 = Tensor::zeros({4 * d});
    p.ff_w2 = Tensor::randn({4 * d, d}, rng, 0.2);
    p.ff_b2 = Tensor::zeros({d});

    const std::size_t mem_utts = static_cast<std::size_t>(state.range(0));
    std::vector<MemSlotMeta> meta;
    for (std::size_t u = 0; u < mem_utts; ++u)
        for (int k = 0; k < 6; ++k) meta.push_back({static_cast<int>(u), static_cast<int>(u % 2)});
    Tensor mem = Tensor::randn({meta.size(), d}, rng, 1.0);
    AttentionMaskSet masks = build_mask_set(n_t, meta, 2, static_cast<int>(mem_utts), 0);
    Tensor h = Tensor::randn({1 + n_t, d}, rng, 1.0);
    Tensor enc = sinusoid_encoding(meta.size() + n_t + 2, d);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dialog_aware_layer(h, mem, masks, p, enc, {}));
    }
}
BENCHMARK(BM_DialogLayer)->Arg(2)->Arg(8)->Arg(32);
