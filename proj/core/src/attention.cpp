#include "dialogxl/attention.hpp"

#include <cmath>

#include "dialogxl/errors.hpp"

namespace dialogxl {

Tensor sinusoid_encoding(std::size_t n_positions, std::size_t d_model) {
    std::vector<double> data(n_positions * d_model);
    for (std::size_t pos = 0; pos < n_positions; ++pos) {
        for (std::size_t i = 0; i < d_model; i += 2) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d_model));
            const double angle = static_cast<double>(pos) * freq;
            data[pos * d_model + i] = std::sin(angle);
            if (i + 1 < d_model) data[pos * d_model + i + 1] = std::cos(angle);
        }
    }
    return Tensor::from_data({n_positions, d_model}, std::move(data));
}

RelPosAttentionResult rel_pos_attention(Tensor q, Tensor k, Tensor v, const MaskMatrix& mask,
                                        const RelPosHeadParams& rel, Tensor rel_encoding,
                                        RelProjectionCache* cache) {
    const std::size_t n_q = q.rows(), n_k = k.rows();
    if (n_k < n_q) {
        throw DimensionError("rel_pos_attention: key rows " + std::to_string(n_k) +
                             " < query rows " + std::to_string(n_q));
    }
    if (mask.query_rows != n_q || mask.key_cols != n_k) {
        throw DimensionError("rel_pos_attention: mask " + std::to_string(mask.query_rows) + "x" +
                             std::to_string(mask.key_cols) + " vs attention " +
                             std::to_string(n_q) + "x" + std::to_string(n_k));
    }
    const std::size_t mem_len = n_k - n_q;
    const std::size_t d_head = q.cols();
    const std::size_t max_dist = mem_len + n_q - 1;
    if (rel_encoding.rows() <= max_dist) {
        throw DimensionError("rel_pos_attention: encoding table covers " +
                             std::to_string(rel_encoding.rows()) + " distances, need " +
                             std::to_string(max_dist + 1));
    }

    // content term with global content bias: (q + u)·kᵀ
    Tensor content = matmul(add_rowvec(q, rel.u), transpose(k));

    // position term: project the encoding table once, score all distances,
    // then gather each (i,j) pair's clamped distance
    Tensor projected;
    if (cache != nullptr && cache->table_id == rel_encoding.id()) {
        auto it = cache->projected.find(rel.wkr.id());
        if (it != cache->projected.end()) projected = it->second;
    }
    if (!projected.defined()) {
        projected = matmul(rel_encoding, rel.wkr);  // [n_dist x d_head]
        if (cache != nullptr) {
            if (cache->table_id != rel_encoding.id()) {
                cache->projected.clear();
                cache->table_id = rel_encoding.id();
            }
            cache->projected.emplace(rel.wkr.id(), projected);
        }
    }
    Tensor pos_all = matmul(add_rowvec(q, rel.v), transpose(projected));  // [n_q x n_dist]
    std::vector<std::vector<std::size_t>> dist(n_q, std::vector<std::size_t>(n_k));
    for (std::size_t i = 0; i < n_q; ++i) {
        for (std::size_t j = 0; j < n_k; ++j) {
            const long long d = static_cast<long long>(mem_len + i) - static_cast<long long>(j);
            dist[i][j] = d > 0 ? static_cast<std::size_t>(d) : 0;
        }
    }
    Tensor position = gather_cols_per_row(pos_all, dist);

    Tensor scores = scale(add(content, position), 1.0 / std::sqrt(static_cast<double>(d_head)));
    Tensor weights = softmax_rows(apply_additive_mask(scores, mask.masked));
    return {matmul(weights, v), weights};
}

Tensor dialog_aware_layer(Tensor h_prev, Tensor mem, const AttentionMaskSet& masks,
                          const LayerParams& params, Tensor rel_encoding, const LayerOptions& opt,
                          std::vector<HeadTrace>* trace) {
    if (params.heads.empty()) throw ConfigError("dialog layer: no attention heads");
    const std::size_t d_model = h_prev.cols();
    std::size_t head_dims = 0;
    for (const auto& h : params.heads) head_dims += h.wq.cols();
    if (head_dims != d_model) {
        throw ConfigError("dialog layer: head dims sum to " + std::to_string(head_dims) +
                          ", expected " + std::to_string(d_model));
    }
    if ((opt.dropout > 0.0 && opt.training) && opt.rng == nullptr) {
        throw ConfigError("dialog layer: dropout requires a random source");
    }

    Tensor h_tilde = mem.defined() && mem.rows() > 0 ? concat_rows(mem, h_prev) : h_prev;

    std::vector<Tensor> head_outputs;
    head_outputs.reserve(params.heads.size());
    for (const auto& head : params.heads) {
        Tensor q = matmul(h_prev, head.wq);
        Tensor k = matmul(h_tilde, head.wk);
        Tensor v = matmul(h_tilde, head.wv);
        const MaskMatrix& mask = masks.for_type(head.type);
        RelPosAttentionResult res =
            rel_pos_attention(q, k, v, mask, head.rel, rel_encoding, opt.proj_cache);
        if (trace != nullptr) trace->push_back({head.type, res.output, res.weights, &mask});
        head_outputs.push_back(std::move(res.output));
    }
    Tensor attn = concat_cols(head_outputs);

    auto feed_forward = [&](Tensor x) {
        Tensor inner = gelu(add_rowvec(matmul(x, params.ff_w1), params.ff_b1));
        return add_rowvec(matmul(inner, params.ff_w2), params.ff_b2);
    };
    auto drop = [&](Tensor x) {
        if (opt.dropout > 0.0 && opt.training) return dropout(x, opt.dropout, *opt.rng, true);
        return x;
    };

    if (!opt.use_residuals) {
        return feed_forward(layer_norm(attn, params.ln_gain, params.ln_bias));
    }
    Tensor h1 = add(h_prev, drop(attn));
    return add(h1, drop(feed_forward(layer_norm(h1, params.ln_gain, params.ln_bias))));
}

}  // namespace dialogxl
