#pragma once

#include <memory>
#include <string>

#include "dialogxl/data.hpp"
#include "dialogxl/model.hpp"

namespace dialogxl {

inline constexpr int kCheckpointVersion = 1;

// Self-describing JSON container: format version, model config, vocabulary,
// label map, speaker registry, and every parameter tensor (name -> shape ->
// data). Double values round-trip exactly.
void save_checkpoint(const std::string& path, const DialogXLModel& model, const Vocabulary& vocab,
                     const LabelSet& labels, const std::vector<std::string>& speakers);

struct LoadedCheckpoint {
    std::unique_ptr<DialogXLModel> model;
    Vocabulary vocab;
    LabelSet labels;
    std::vector<std::string> speakers;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace dialogxl
