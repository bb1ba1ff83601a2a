#include "dialogxl/masks.hpp"

#include "dialogxl/errors.hpp"

namespace dialogxl {

const char* head_type_name(HeadType t) {
    switch (t) {
        case HeadType::global: return "global";
        case HeadType::local: return "local";
        case HeadType::speaker: return "speaker";
        case HeadType::listener: return "listener";
    }
    return "?";
}

std::size_t MaskMatrix::masked_count() const {
    std::size_t n = 0;
    for (std::uint8_t m : masked) n += m;
    return n;
}

namespace {

MaskMatrix blank(std::size_t n_t, std::size_t mem_len) {
    MaskMatrix m;
    m.query_rows = 1 + n_t;
    m.key_cols = mem_len + 1 + n_t;
    m.masked.assign(m.query_rows * m.key_cols, 0);
    return m;
}

// all query rows share one column pattern
void mask_mem_column(MaskMatrix& m, std::size_t col) {
    for (std::size_t r = 0; r < m.query_rows; ++r) m.set(r, col, true);
}

}  // namespace

MaskMatrix build_global_mask(std::size_t n_t, const std::vector<MemSlotMeta>& mem) {
    return blank(n_t, mem.size());
}

MaskMatrix build_local_mask(std::size_t n_t, const std::vector<MemSlotMeta>& mem, int window, int t) {
    if (window < 0) throw ConfigError("local mask: window must be >= 0");
    MaskMatrix m = blank(n_t, mem.size());
    const long long horizon = static_cast<long long>(t) - static_cast<long long>(window);
    for (std::size_t j = 0; j < mem.size(); ++j) {
        if (static_cast<long long>(mem[j].utterance_index) < horizon) mask_mem_column(m, j);
    }
    return m;
}

MaskMatrix build_speaker_mask(std::size_t n_t, const std::vector<MemSlotMeta>& mem, int speaker_t) {
    MaskMatrix m = blank(n_t, mem.size());
    for (std::size_t j = 0; j < mem.size(); ++j) {
        if (mem[j].speaker_id != speaker_t) mask_mem_column(m, j);
    }
    return m;
}

MaskMatrix build_listener_mask(std::size_t n_t, const std::vector<MemSlotMeta>& mem, int speaker_t) {
    MaskMatrix m = blank(n_t, mem.size());
    for (std::size_t j = 0; j < mem.size(); ++j) {
        if (mem[j].speaker_id == speaker_t) mask_mem_column(m, j);
    }
    return m;
}

const MaskMatrix& AttentionMaskSet::for_type(HeadType t) const {
    switch (t) {
        case HeadType::global: return global;
        case HeadType::local: return local;
        case HeadType::speaker: return speaker;
        case HeadType::listener: return listener;
    }
    throw ConfigError("unknown head type");
}

AttentionMaskSet build_mask_set(std::size_t n_t, const std::vector<MemSlotMeta>& mem, int window,
                                int t, int speaker_t) {
    AttentionMaskSet s;
    s.window = window;
    s.global = build_global_mask(n_t, mem);
    s.local = build_local_mask(n_t, mem, window, t);
    s.speaker = build_speaker_mask(n_t, mem, speaker_t);
    s.listener = build_listener_mask(n_t, mem, speaker_t);
    return s;
}

AttentionMaskSet mask_oracle(const std::vector<UtteranceSketch>& prefix, int t, int window) {
    if (t < 0 || static_cast<std::size_t>(t) >= prefix.size()) {
        throw ConfigError("mask oracle: t out of range");
    }
    const std::size_t n_t = prefix[static_cast<std::size_t>(t)].token_count;
    std::size_t mem_len = 0;
    for (int u = 0; u < t; ++u) mem_len += prefix[static_cast<std::size_t>(u)].token_count;

    const std::size_t rows = 1 + n_t;
    const std::size_t cols = mem_len + 1 + n_t;
    AttentionMaskSet s;
    s.window = window;
    for (MaskMatrix* m : {&s.global, &s.local, &s.speaker, &s.listener}) {
        m->query_rows = rows;
        m->key_cols = cols;
        m->masked.assign(rows * cols, 0);
    }

    const int p_t = prefix[static_cast<std::size_t>(t)].speaker_id;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            if (j >= mem_len) continue;  // self visibility: u_t's columns stay open

            // key column j belongs to utterance `owner`
            int owner = 0;
            std::size_t cursor = j;
            while (cursor >= prefix[static_cast<std::size_t>(owner)].token_count) {
                cursor -= prefix[static_cast<std::size_t>(owner)].token_count;
                owner += 1;
            }
            const int p_owner = prefix[static_cast<std::size_t>(owner)].speaker_id;

            // local: j outside Idx({u_{t-window}, ..., u_t})
            const bool in_field = static_cast<long long>(owner) >=
                                  static_cast<long long>(t) - static_cast<long long>(window);
            if (!in_field) s.local.set(i, j, true);
            // speaker: j in Idx({u | p(u) != p(u_t)})
            if (p_owner != p_t) s.speaker.set(i, j, true);
            // listener: j in Idx({u | p(u) == p(u_t)})
            if (p_owner == p_t) s.listener.set(i, j, true);
        }
    }
    return s;
}

}  // namespace dialogxl
