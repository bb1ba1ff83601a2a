#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "dialogxl/masks.hpp"
#include "dialogxl/ops.hpp"
#include "dialogxl/rng.hpp"
#include "dialogxl/tensor.hpp"

namespace dialogxl {

// Sinusoidal encodings for relative distances 0..n_positions-1, deterministic
// in (n_positions, d_model). Row r encodes distance r.
Tensor sinusoid_encoding(std::size_t n_positions, std::size_t d_model);

// Learned relative-position pieces of one attention head: the projection of
// the shared encoding table into head space plus the global content bias u
// and position bias v.
struct RelPosHeadParams {
    Tensor wkr;  // [d_model x d_head]
    Tensor u;    // [d_head]
    Tensor v;    // [d_head]
};

struct AttentionHeadParams {
    HeadType type = HeadType::global;
    Tensor wq;  // [d_model x d_head]
    Tensor wk;
    Tensor wv;
    RelPosHeadParams rel;
};

struct RelPosAttentionResult {
    Tensor output;   // [n_q x d_head]
    Tensor weights;  // [n_q x n_k]
};

// Memoizes the per-head projection of the relative encoding table
// (rel_encoding · Wkr), which is constant while parameters do not move.
// Scope one cache to a single optimizer step or evaluation pass: entries
// belong to the tape that was active when they were created, and they go
// stale as soon as parameters are updated.
struct RelProjectionCache {
    std::uint64_t table_id = 0;
    std::unordered_map<std::uint64_t, Tensor> projected;  // wkr tensor id -> table
};

// Four-term relative scoring over projected queries/keys/values:
//   score(i,j) = [ q_i·k_j + q_i·(Wkr·R[dist]) + u·k_j + v·(Wkr·R[dist]) ] / sqrt(d_head)
// with dist(i,j) = (mem_len + i) - j clamped at 0, mem_len = n_k - n_q.
// The mask is applied additively before the row softmax; masked weights end
// up below 1e-12.
RelPosAttentionResult rel_pos_attention(Tensor q, Tensor k, Tensor v, const MaskMatrix& mask,
                                        const RelPosHeadParams& rel, Tensor rel_encoding,
                                        RelProjectionCache* cache = nullptr);

struct LayerParams {
    std::vector<AttentionHeadParams> heads;  // concatenation order
    Tensor ln_gain;  // [d_model]
    Tensor ln_bias;
    Tensor ff_w1;  // [d_model x d_ff]
    Tensor ff_b1;
    Tensor ff_w2;  // [d_ff x d_model]
    Tensor ff_b2;
};

struct LayerOptions {
    bool use_residuals = true;  // residual connections around both sublayers
    double dropout = 0.0;
    Rng* rng = nullptr;
    bool training = false;
    RelProjectionCache* proj_cache = nullptr;
};

// Per-head probe filled during a forward pass (weights row sums, masked
// weights and head permutation checks read from here).
struct HeadTrace {
    HeadType type;
    Tensor output;
    Tensor weights;
    const MaskMatrix* mask;
};

// One Transformer layer with dialog-aware multi-head attention: each head
// attends under its type's mask over [memory || current], head outputs are
// concatenated back to d_model, then LayerNorm and a two-layer feed-forward.
// With use_residuals the block is
//   h1 = h + drop(attn);  out = h1 + drop(FF(LN(h1)))
// and without it the literal residual-free form  out = FF(LN(attn)).
Tensor dialog_aware_layer(Tensor h_prev, Tensor mem, const AttentionMaskSet& masks,
                          const LayerParams& params, Tensor rel_encoding, const LayerOptions& opt,
                          std::vector<HeadTrace>* trace = nullptr);

}  // namespace dialogxl
