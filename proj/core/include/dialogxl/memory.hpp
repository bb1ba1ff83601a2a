#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dialogxl/tensor.hpp"

namespace dialogxl {

// Per cached token position: which utterance it came from and who spoke it.
struct MemSlotMeta {
    int utterance_index;
    int speaker_id;
};

enum class TruncationGranularity : std::uint8_t {
    token,      // oldest hidden states dropped one position at a time
    utterance,  // oldest whole utterance blocks dropped
};

// Utterance-recurrence memory: per-layer caches of historical hidden states
// holding only real utterance tokens. [CLS] and padding rows are never
// stored, so the cache wastes no slots by construction. All layers grow and
// truncate in lockstep and share one metadata sequence.
//
// Cached values are detached: gradient flow stops at the cache boundary.
class MemoryBank {
  public:
    static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

    MemoryBank(std::size_t n_layers, std::size_t d_model, std::size_t max_len,
               TruncationGranularity granularity = TruncationGranularity::token);

    std::size_t n_layers() const { return hidden_.size(); }
    std::size_t d_model() const { return d_model_; }
    std::size_t max_len() const { return max_len_; }
    std::size_t length() const { return meta_.size(); }
    bool empty() const { return meta_.empty(); }
    const std::vector<MemSlotMeta>& meta() const { return meta_; }
    int last_utterance_index() const;  // -1 when empty

    // Hidden states of one layer as a [len x d] tensor (requires_grad off).
    Tensor layer(std::size_t l) const;

    // h rows: [CLS] at row 0 followed by the n_t utterance token rows.
    // Appends exactly the n_t token rows, detached, with matching metadata.
    // Layers must be updated 0..L-1 for each utterance; layer 0 drives the
    // metadata and later layers are checked against it.
    void update(std::size_t layer, const Tensor& h, int utterance_index, int speaker_id);

    // Drops oldest positions until length() <= max_len, synchronously across
    // layers and metadata. Returns the number of dropped positions.
    std::size_t truncate();

    void reset();

    // Restores an exact prior state (layer hidden rows, metadata, sequencing
    // cursor). Pairs with layer()/meta() snapshots; used by gradient-check
    // harnesses that must hold the cache fixed while parameters move.
    void restore(const std::vector<Tensor>& layer_hidden, std::vector<MemSlotMeta> meta,
                 int last_utterance);

    // Debug dump: per-layer length, per-utterance meta blocks, optional
    // checksums of the cached hidden states.
    std::string snapshot_json(bool with_checksums = false) const;

  private:
    std::size_t d_model_;
    std::size_t max_len_;
    TruncationGranularity granularity_;
    std::vector<std::vector<double>> hidden_;  // per layer, row-major len x d
    std::vector<MemSlotMeta> meta_;
    int last_utterance_ = -1;
};

// Segment-recurrence baseline: caches fixed-width rows including padding
// slots. Exists for the memory-efficiency comparison.
class SegmentMemory {
  public:
    SegmentMemory(std::size_t n_layers, std::size_t d_model, std::size_t max_len);

    std::size_t length() const { return pad_mask_.size(); }
    std::size_t pad_count() const;
    std::size_t real_count() const { return length() - pad_count(); }
    const std::vector<std::uint8_t>& pad_mask() const { return pad_mask_; }

    // Appends all rows of the fixed-width segment, padding included.
    void update(std::size_t layer, const Tensor& h_segment, const std::vector<std::uint8_t>& pad_mask);

    std::size_t truncate();

    // (#pad slots) / (total slots); throws NumericError on empty memory.
    double waste_rate() const;

  private:
    std::size_t d_model_;
    std::size_t max_len_;
    std::vector<std::vector<double>> hidden_;
    std::vector<std::uint8_t> pad_mask_;
};

}  // namespace dialogxl
