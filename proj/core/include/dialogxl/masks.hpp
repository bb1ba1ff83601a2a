#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "dialogxl/memory.hpp"

namespace dialogxl {

enum class HeadType : std::uint8_t { global, local, speaker, listener };

const char* head_type_name(HeadType t);

inline constexpr int kUnboundedWindow = std::numeric_limits<int>::max();

// Boolean attention mask over [memory || current] key positions for the
// query utterance's rows ([CLS] + n_t tokens). true = masked. Every query
// row carries the same pattern: the [CLS] row is treated like a token row
// of the query utterance.
struct MaskMatrix {
    std::size_t query_rows = 0;
    std::size_t key_cols = 0;
    std::vector<std::uint8_t> masked;  // row-major

    bool at(std::size_t r, std::size_t c) const { return masked[r * key_cols + c] != 0; }
    void set(std::size_t r, std::size_t c, bool m) { masked[r * key_cols + c] = m ? 1 : 0; }

    std::size_t masked_count() const;
    bool operator==(const MaskMatrix& other) const = default;
};

// Eq-by-eq mask builders. Key columns are memory positions in cache order
// followed by the current utterance's [CLS] and token columns. The current
// utterance's own columns are never masked: full self-masking would leave
// degenerate softmax rows whenever the history has no qualifying utterance.

// nothing masked
MaskMatrix build_global_mask(std::size_t n_t, const std::vector<MemSlotMeta>& mem);

// memory reception field of the `window` latest historical utterances:
// memory columns with utterance_index < t - window are masked
MaskMatrix build_local_mask(std::size_t n_t, const std::vector<MemSlotMeta>& mem, int window, int t);

// intra-speaker: memory columns spoken by other speakers are masked
MaskMatrix build_speaker_mask(std::size_t n_t, const std::vector<MemSlotMeta>& mem, int speaker_t);

// inter-speaker: memory columns spoken by the present speaker are masked
MaskMatrix build_listener_mask(std::size_t n_t, const std::vector<MemSlotMeta>& mem, int speaker_t);

struct AttentionMaskSet {
    MaskMatrix global;
    MaskMatrix local;
    MaskMatrix speaker;
    MaskMatrix listener;
    int window = kUnboundedWindow;

    const MaskMatrix& for_type(HeadType t) const;
    bool operator==(const AttentionMaskSet& other) const = default;
};

AttentionMaskSet build_mask_set(std::size_t n_t, const std::vector<MemSlotMeta>& mem, int window,
                                int t, int speaker_t);

// Independent reference for the four builders: recomputes every mask by
// iterating each (query token, key token) pair and evaluating the
// set-membership condition directly on the conversation prefix, with no
// shared code with the builders. prefix covers u_0..u_t; memory is the
// untruncated token sequence of u_0..u_{t-1}.
struct UtteranceSketch {
    std::size_t token_count;  // n_i, excluding [CLS]
    int speaker_id;
};

AttentionMaskSet mask_oracle(const std::vector<UtteranceSketch>& prefix, int t, int window);

}  // namespace dialogxl
