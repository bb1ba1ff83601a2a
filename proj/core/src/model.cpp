#include "dialogxl/model.hpp"

#include <cmath>
#include <sstream>

#include "dialogxl/errors.hpp"
#include "dialogxl/ops.hpp"

namespace dialogxl {

std::vector<HeadType> HeadAllocation::layout() const {
    std::vector<HeadType> out;
    for (int i = 0; i < global; ++i) out.push_back(HeadType::global);
    for (int i = 0; i < local; ++i) out.push_back(HeadType::local);
    for (int i = 0; i < speaker; ++i) out.push_back(HeadType::speaker);
    for (int i = 0; i < listener; ++i) out.push_back(HeadType::listener);
    return out;
}

std::string HeadAllocation::to_string() const {
    std::ostringstream os;
    os << global << "," << local << "," << speaker << "," << listener;
    return os.str();
}

HeadAllocation HeadAllocation::parse(const std::string& csv) {
    HeadAllocation a;
    int vals[4];
    char comma;
    std::istringstream is(csv);
    if (!(is >> vals[0] >> comma >> vals[1] >> comma >> vals[2] >> comma >> vals[3])) {
        throw ConfigError("head allocation: expected \"g,l,s,t\", got \"" + csv + "\"");
    }
    a.global = vals[0];
    a.local = vals[1];
    a.speaker = vals[2];
    a.listener = vals[3];
    return a;
}

void ModelConfig::validate() const {
    if (vocab_size == 0) throw ConfigError("model config: vocab_size must be positive");
    if (n_labels == 0) throw ConfigError("model config: n_labels must be positive");
    if (d_model == 0 || n_layers == 0 || n_heads == 0) {
        throw ConfigError("model config: d_model, n_layers, n_heads must be positive");
    }
    if (heads.global < 0 || heads.local < 0 || heads.speaker < 0 || heads.listener < 0) {
        throw ConfigError("model config: head counts must be >= 0");
    }
    if (static_cast<std::size_t>(heads.total()) != n_heads) {
        throw ConfigError("model config: head allocation " + heads.to_string() + " sums to " +
                          std::to_string(heads.total()) + ", expected " + std::to_string(n_heads));
    }
    if (d_model % n_heads != 0) {
        throw ConfigError("model config: d_model " + std::to_string(d_model) +
                          " not divisible by " + std::to_string(n_heads) + " heads");
    }
    if (window < 0) throw ConfigError("model config: window must be >= 0");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model config: dropout must be in [0,1)");
    if (mode == SpeakerMode::speaker_embedding) {
        if (n_speakers == 0) throw ConfigError("model config: speaker_embedding mode needs n_speakers");
        if (heads.speaker != 0 || heads.listener != 0) {
            throw ConfigError("model config: speaker_embedding mode replaces speaker/listener heads");
        }
    }
}

ModelConfig speaker_embedding_config(ModelConfig base, std::size_t n_speakers) {
    base.mode = SpeakerMode::speaker_embedding;
    base.heads.global += base.heads.speaker + base.heads.listener;
    base.heads.speaker = 0;
    base.heads.listener = 0;
    base.n_speakers = n_speakers;
    return base;
}

int predict_label(const std::vector<double>& probabilities) {
    if (probabilities.empty()) throw DimensionError("predict_label: empty distribution");
    int best = 0;
    for (std::size_t i = 1; i < probabilities.size(); ++i) {
        if (probabilities[i] > probabilities[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

DialogXLModel::DialogXLModel(ModelConfig cfg, Rng& init_rng) : cfg_(cfg) {
    cfg_.validate();
    const DType dt = cfg_.precision;
    const double s = cfg_.init_std;
    const std::size_t d = cfg_.d_model;
    const std::size_t d_head = d / cfg_.n_heads;
    const std::size_t d_ff = 4 * d;

    embedding_ = Tensor::randn({cfg_.vocab_size, d}, init_rng, s, true, dt);
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
        LayerParams p;
        for (HeadType t : cfg_.heads.layout()) {
            AttentionHeadParams h;
            h.type = t;
            h.wq = Tensor::randn({d, d_head}, init_rng, s, true, dt);
            h.wk = Tensor::randn({d, d_head}, init_rng, s, true, dt);
            h.wv = Tensor::randn({d, d_head}, init_rng, s, true, dt);
            h.rel.wkr = Tensor::randn({d, d_head}, init_rng, s, true, dt);
            h.rel.u = Tensor::randn({d_head}, init_rng, s, true, dt);
            h.rel.v = Tensor::randn({d_head}, init_rng, s, true, dt);
            p.heads.push_back(std::move(h));
        }
        p.ln_gain = Tensor::full({d}, 1.0, true, dt);
        p.ln_bias = Tensor::zeros({d}, true, dt);
        p.ff_w1 = Tensor::randn({d, d_ff}, init_rng, s, true, dt);
        p.ff_b1 = Tensor::zeros({d_ff}, true, dt);
        p.ff_w2 = Tensor::randn({d_ff, d}, init_rng, s, true, dt);
        p.ff_b2 = Tensor::zeros({d}, true, dt);
        layers_.push_back(std::move(p));
    }
    cls_w1 = Tensor::randn({d, d}, init_rng, s, true, dt);
    cls_b1 = Tensor::zeros({d}, true, dt);
    cls_w2 = Tensor::randn({d, cfg_.n_labels}, init_rng, s, true, dt);
    cls_b2 = Tensor::zeros({cfg_.n_labels}, true, dt);
    if (cfg_.mode == SpeakerMode::speaker_embedding) {
        speaker_embedding_ = Tensor::randn({cfg_.n_speakers, d}, init_rng, s, true, dt);
    }
    ensure_encoding(64);
}

std::vector<std::pair<std::string, Tensor>> DialogXLModel::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("embedding", embedding_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::string base = "layer" + std::to_string(l) + ".";
        const LayerParams& p = layers_[l];
        for (std::size_t k = 0; k < p.heads.size(); ++k) {
            const std::string hb = base + "head" + std::to_string(k) + ".";
            out.emplace_back(hb + "wq", p.heads[k].wq);
            out.emplace_back(hb + "wk", p.heads[k].wk);
            out.emplace_back(hb + "wv", p.heads[k].wv);
            out.emplace_back(hb + "wkr", p.heads[k].rel.wkr);
            out.emplace_back(hb + "u", p.heads[k].rel.u);
            out.emplace_back(hb + "v", p.heads[k].rel.v);
        }
        out.emplace_back(base + "ln.gain", p.ln_gain);
        out.emplace_back(base + "ln.bias", p.ln_bias);
        out.emplace_back(base + "ff.w1", p.ff_w1);
        out.emplace_back(base + "ff.b1", p.ff_b1);
        out.emplace_back(base + "ff.w2", p.ff_w2);
        out.emplace_back(base + "ff.b2", p.ff_b2);
    }
    out.emplace_back("classifier.w_h", cls_w1);
    out.emplace_back("classifier.b_h", cls_b1);
    out.emplace_back("classifier.w_z", cls_w2);
    out.emplace_back("classifier.b_z", cls_b2);
    if (speaker_embedding_.defined()) out.emplace_back("speaker_embedding", speaker_embedding_);
    return out;
}

MemoryBank DialogXLModel::make_memory() const {
    return MemoryBank(cfg_.n_layers, cfg_.d_model, cfg_.max_memory, cfg_.truncation);
}

Tensor DialogXLModel::embed(const std::vector<int>& token_ids) const {
    for (int id : token_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size) {
            throw DataError("embed: token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(cfg_.vocab_size));
        }
    }
    return gather_rows(embedding_, token_ids);
}

void DialogXLModel::ensure_encoding(std::size_t distances) const {
    if (rel_encoding_.defined() && rel_encoding_.rows() >= distances) return;
    std::size_t n = rel_encoding_.defined() ? rel_encoding_.rows() : 64;
    while (n < distances) n *= 2;
    rel_encoding_ = sinusoid_encoding(n, cfg_.d_model);
}

Tensor DialogXLModel::classifier(Tensor pooled) const {
    Tensor z = relu(add_rowvec(matmul(pooled, cls_w1), cls_b1));
    return softmax_rows(add_rowvec(matmul(z, cls_w2), cls_b2));
}

UtteranceForward DialogXLModel::forward_utterance(MemoryBank& bank, const Utterance& u, int t,
                                                  const ForwardOptions& opt) const {
    if (t != bank.last_utterance_index() + 1) {
        throw SequencingError("forward_utterance: utterance " + std::to_string(t) +
                              " after " + std::to_string(bank.last_utterance_index()));
    }
    if ((opt.training && cfg_.dropout > 0.0) && opt.rng == nullptr) {
        throw ConfigError("forward_utterance: training with dropout needs a random source");
    }

    const std::vector<int> x = encode_input(u);
    const std::size_t n_t = u.tokens.size();
    Tensor h = embed(x);

    if (cfg_.mode == SpeakerMode::speaker_embedding) {
        if (u.speaker_id < 0 || static_cast<std::size_t>(u.speaker_id) >= cfg_.n_speakers) {
            throw DataError("forward_utterance: unknown speaker id " + std::to_string(u.speaker_id) +
                            " for a role table of " + std::to_string(cfg_.n_speakers));
        }
        const std::vector<int> role_ids(x.size(), u.speaker_id);
        h = add(h, gather_rows(speaker_embedding_, role_ids));
    }

    AttentionMaskSet local_masks = build_mask_set(n_t, bank.meta(), cfg_.window, t, u.speaker_id);
    if (opt.trace != nullptr) {
        // the trace owns the masks so recorded per-head pointers stay valid
        // after this call returns
        opt.trace->masks = std::move(local_masks);
        opt.trace->layers.clear();
    }
    const AttentionMaskSet& masks = opt.trace != nullptr ? opt.trace->masks : local_masks;
    ensure_encoding(bank.length() + x.size());

    LayerOptions layer_opt;
    layer_opt.use_residuals = cfg_.use_residuals;
    layer_opt.dropout = cfg_.dropout;
    layer_opt.rng = opt.rng;
    layer_opt.training = opt.training;
    layer_opt.proj_cache = opt.proj_cache;

    std::vector<Tensor> layer_inputs;
    layer_inputs.reserve(cfg_.n_layers);
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
        layer_inputs.push_back(h);
        Tensor mem = bank.length() > 0 ? bank.layer(l) : Tensor{};
        std::vector<HeadTrace>* layer_trace = nullptr;
        if (opt.trace != nullptr) {
            opt.trace->layers.emplace_back();
            layer_trace = &opt.trace->layers.back();
        }
        h = dialog_aware_layer(h, mem, masks, layers_[l], rel_encoding_, layer_opt, layer_trace);
    }
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
        bank.update(l, layer_inputs[l], t, u.speaker_id);
    }
    bank.truncate();

    Tensor pooled = slice_rows(h, 0, 1);
    Tensor probs = classifier(pooled);

    UtteranceForward out;
    out.prob_row = probs;
    out.prediction.probabilities.assign(probs.data().begin(), probs.data().end());
    out.prediction.label = predict_label(out.prediction.probabilities);
    out.prediction.pooled.assign(pooled.data().begin(), pooled.data().end());
    return out;
}

std::size_t DialogXLModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : named_parameters()) n += p.numel();
    return n;
}

Tensor sequence_loss(const std::vector<std::pair<Tensor, int>>& items, bool literal_form) {
    if (items.empty()) throw DimensionError("sequence_loss: no predictions");
    Tensor total;
    for (const auto& [probs, gold] : items) {
        if (gold < 0 || static_cast<std::size_t>(gold) >= probs.cols()) {
            throw DataError("sequence_loss: label " + std::to_string(gold) +
                            " outside [0," + std::to_string(probs.cols()) + ")");
        }
        Tensor p = pick(probs, 0, static_cast<std::size_t>(gold));
        Tensor term = literal_form ? scale(p, -1.0) : scale(log(p), -1.0);
        total = total.defined() ? add(total, term) : term;
    }
    return scale(total, 1.0 / static_cast<double>(items.size()));
}

}  // namespace dialogxl
