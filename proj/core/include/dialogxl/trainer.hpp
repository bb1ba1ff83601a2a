#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dialogxl/checkpoint.hpp"
#include "dialogxl/data.hpp"
#include "dialogxl/metrics.hpp"
#include "dialogxl/model.hpp"

namespace dialogxl {

struct TrainConfig {
    std::string train_path;
    std::string val_path;
    ModelConfig model;  // vocab/label/speaker sizes are filled from the data
    int epochs = 10;
    int batch_size = 8;  // conversations per optimizer step
    double lr = 1e-3;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    int patience = 5;  // early stopping; <= 0 disables
    MetricKind metric = MetricKind::weighted_f1;
    std::string exclude_label;  // for micro_f1
    std::string checkpoint_out;
    std::string log_out;

    void validate() const;
};

// Flat key/value JSON config file; model keys live alongside trainer keys.
TrainConfig train_config_from_file(const std::string& path);

struct EpochLog {
    int epoch;          // 0 is the pre-training validation pass
    double train_loss;  // NaN-free; 0 for epoch 0
    double val_metric;
};

struct TrainResult {
    std::vector<EpochLog> log;
    std::string log_text;  // exact log file content, deterministic per seed
    int best_epoch = 0;
    double best_metric = 0.0;
    std::unique_ptr<DialogXLModel> model;  // best-checkpoint parameters
    Vocabulary vocab;
    LabelSet labels;
    std::vector<std::string> speakers;
};

// In-memory training loop: AdamW on the mean cross-entropy over utterances,
// loss accumulated per conversation, one optimizer step per batch of
// conversations, best epoch selected by the validation metric.
TrainResult train_on(const Dataset& train, const Dataset& val, const TrainConfig& cfg);

// File-based wrapper: loads datasets (vocabulary and labels built from the
// training split), trains, writes checkpoint and log when paths are set.
TrainResult train(const TrainConfig& cfg);

EvalReport evaluate(const DialogXLModel& model, const Dataset& data,
                    std::optional<int> excluded_label = std::nullopt);

// Memory-efficiency sweep: simulates both recurrence schemes over the
// dataset at each max_len. Utterance recurrence stores no padding by
// construction; segment recurrence pads every utterance row to the batch-
// wide maximum. Context columns report mean real history tokens available
// per query.
struct MemorySweepRow {
    std::size_t max_len;
    double utterance_waste;  // identically 0
    double segment_waste;
    double utterance_context;
    double segment_context;
};

std::vector<MemorySweepRow> analyze_memory(const Dataset& data,
                                           const std::vector<std::size_t>& sweep, int batch_size);
std::string memory_report_csv(const std::vector<MemorySweepRow>& rows);

// Ablation arms: head budgets of removed types are reallocated so the head
// count stays constant (to global; a removed global budget moves to local).
struct AblationRow {
    std::string variant;  // "control" or the removal name
    double mean_metric;
    double delta_vs_control;  // control - variant
    int runs;
};

HeadAllocation ablated_allocation(HeadAllocation base, const std::string& removal);
std::vector<AblationRow> ablate(const Dataset& train, const Dataset& val, const TrainConfig& base,
                                const std::vector<std::string>& removals, int runs, int jobs = 1);
std::string ablation_csv(const std::vector<AblationRow>& rows);

// Writes the four mask matrices for the conversation's t-th utterance
// (1-based) with row/column token and speaker annotations.
void dump_masks(const Dataset& data, const std::string& conversation_id, int t, int window,
                const std::string& out_path);

// Round-trip reader for the dump format.
AttentionMaskSet read_mask_dump(const std::string& path);

}  // namespace dialogxl
