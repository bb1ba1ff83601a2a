#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dialogxl/attention.hpp"
#include "dialogxl/data.hpp"
#include "dialogxl/memory.hpp"
#include "dialogxl/tensor.hpp"

namespace dialogxl {

struct HeadAllocation {
    int global = 2;
    int local = 2;
    int speaker = 4;
    int listener = 4;

    int total() const { return global + local + speaker + listener; }
    std::vector<HeadType> layout() const;  // concatenation order: global, local, speaker, listener
    std::string to_string() const;
    static HeadAllocation parse(const std::string& csv);  // "2,2,4,4"
};

enum class SpeakerMode : std::uint8_t { dialog_attention, speaker_embedding };

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t n_labels = 0;
    std::size_t d_model = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 12;
    HeadAllocation heads{};
    int window = 2;
    std::size_t max_memory = 400;  // MemoryBank::kUnbounded for no limit, 0 for none
    double dropout = 0.0;
    DType precision = DType::f64;
    SpeakerMode mode = SpeakerMode::dialog_attention;
    std::size_t n_speakers = 0;  // role-embedding table size (speaker_embedding mode)
    bool use_residuals = true;
    bool literal_loss = false;  // the no-log loss variant, for fidelity experiments
    TruncationGranularity truncation = TruncationGranularity::token;
    double init_std = 0.08;

    void validate() const;
};

// The speaker-role-embedding comparator configuration: speaker and listener
// head budgets are reassigned to global heads (total unchanged) and a
// trainable role vector per known speaker is added to every input token
// embedding of its utterance.
ModelConfig speaker_embedding_config(ModelConfig base, std::size_t n_speakers);

struct Prediction {
    std::vector<double> probabilities;  // P_t over the label set
    int label = -1;                     // argmax, smallest index wins ties
    std::vector<double> pooled;         // final [CLS] hidden state
};

int predict_label(const std::vector<double>& probabilities);

struct ForwardTrace {
    AttentionMaskSet masks;
    std::vector<std::vector<HeadTrace>> layers;
};

struct ForwardOptions {
    bool training = false;
    Rng* rng = nullptr;            // dropout draws
    ForwardTrace* trace = nullptr;
    RelProjectionCache* proj_cache = nullptr;  // scoped to one step/eval pass
};

struct UtteranceForward {
    Tensor prob_row;  // [1 x |S|], tape-connected when recording
    Prediction prediction;
};

class DialogXLModel {
  public:
    DialogXLModel(ModelConfig cfg, Rng& init_rng);

    const ModelConfig& config() const { return cfg_; }

    // Stable iteration order; drives the optimizer and the checkpoint format.
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;

    MemoryBank make_memory() const;

    // Word-embedding lookup of an encoded input (no position embedding).
    Tensor embed(const std::vector<int>& token_ids) const;

    // Runs the full stack for the conversation's t-th utterance: embedding,
    // L dialog-aware layers against the bank, bank update with each layer's
    // input (detached), truncation, then the [CLS] classifier head.
    // Utterances must arrive in order.
    UtteranceForward forward_utterance(MemoryBank& bank, const Utterance& u, int t,
                                       const ForwardOptions& opt = {}) const;

    std::size_t parameter_count() const;

  private:
    Tensor classifier(Tensor pooled) const;
    void ensure_encoding(std::size_t distances) const;

    ModelConfig cfg_;
    Tensor embedding_;
    Tensor speaker_embedding_;  // defined only in speaker_embedding mode
    std::vector<LayerParams> layers_;
    Tensor cls_w1, cls_b1;  // W_h, b_h
    Tensor cls_w2, cls_b2;  // W_z, b_z
    mutable Tensor rel_encoding_;
};

// Mean over utterances of -log P_t[y_t] (or -P_t[y_t] in the literal
// variant). Throws on labels outside the probability row.
Tensor sequence_loss(const std::vector<std::pair<Tensor, int>>& items, bool literal_form = false);

}  // namespace dialogxl
