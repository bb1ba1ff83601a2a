#pragma once

// Internal JSON (de)serialization of ModelConfig, shared by the checkpoint
// format and the trainer's flat config files. Not installed.

#include "dialogxl/errors.hpp"
#include "dialogxl/model.hpp"
#include <set>
#include "json.hpp"

namespace dialogxl::detail {

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["vocab_size"] = c.vocab_size;
    j["n_labels"] = c.n_labels;
    j["d_model"] = c.d_model;
    j["n_layers"] = c.n_layers;
    j["n_heads"] = c.n_heads;
    j["head_allocation"] = c.heads.to_string();
    j["window"] = c.window == kUnboundedWindow ? -1 : c.window;
    j["max_memory"] = c.max_memory == MemoryBank::kUnbounded
                          ? -1
                          : static_cast<long long>(c.max_memory);
    j["dropout"] = c.dropout;
    j["precision"] = c.precision == DType::f64 ? "f64" : "f32";
    j["mode"] = c.mode == SpeakerMode::speaker_embedding ? "speaker_embedding" : "dialog_attention";
    j["n_speakers"] = c.n_speakers;
    j["use_residuals"] = c.use_residuals;
    j["literal_loss"] = c.literal_loss;
    j["truncation"] = c.truncation == TruncationGranularity::utterance ? "utterance" : "token";
    j["init_std"] = c.init_std;
    return j;
}

// Applies the keys present in j on top of `base`; unknown keys are an error.
inline ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {}) {
    static const std::set<std::string> known = {
        "vocab_size", "n_labels",  "d_model",       "n_layers",     "n_heads",
        "head_allocation", "window", "max_memory",  "dropout",      "precision",
        "mode",       "n_speakers", "use_residuals", "literal_loss", "truncation",
        "init_std"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.contains(key)) {
            throw ConfigError("model config: unknown key '" + key + "'");
        }
    }
    ModelConfig c = base;
    if (j.contains("vocab_size")) c.vocab_size = j["vocab_size"].get<std::size_t>();
    if (j.contains("n_labels")) c.n_labels = j["n_labels"].get<std::size_t>();
    if (j.contains("d_model")) c.d_model = j["d_model"].get<std::size_t>();
    if (j.contains("n_layers")) c.n_layers = j["n_layers"].get<std::size_t>();
    if (j.contains("n_heads")) c.n_heads = j["n_heads"].get<std::size_t>();
    if (j.contains("head_allocation"))
        c.heads = HeadAllocation::parse(j["head_allocation"].get<std::string>());
    if (j.contains("window")) {
        const long long w = j["window"].get<long long>();
        c.window = w < 0 ? kUnboundedWindow : static_cast<int>(w);
    }
    if (j.contains("max_memory")) {
        const long long m = j["max_memory"].get<long long>();
        c.max_memory = m < 0 ? MemoryBank::kUnbounded : static_cast<std::size_t>(m);
    }
    if (j.contains("dropout")) c.dropout = j["dropout"].get<double>();
    if (j.contains("precision")) {
        const std::string p = j["precision"].get<std::string>();
        if (p != "f32" && p != "f64") throw ConfigError("model config: precision must be f32|f64");
        c.precision = p == "f64" ? DType::f64 : DType::f32;
    }
    if (j.contains("mode")) {
        const std::string m = j["mode"].get<std::string>();
        if (m == "speaker_embedding") c.mode = SpeakerMode::speaker_embedding;
        else if (m == "dialog_attention") c.mode = SpeakerMode::dialog_attention;
        else throw ConfigError("model config: mode must be dialog_attention|speaker_embedding");
    }
    if (j.contains("n_speakers")) c.n_speakers = j["n_speakers"].get<std::size_t>();
    if (j.contains("use_residuals")) c.use_residuals = j["use_residuals"].get<bool>();
    if (j.contains("literal_loss")) c.literal_loss = j["literal_loss"].get<bool>();
    if (j.contains("truncation")) {
        const std::string t = j["truncation"].get<std::string>();
        if (t == "utterance") c.truncation = TruncationGranularity::utterance;
        else if (t == "token") c.truncation = TruncationGranularity::token;
        else throw ConfigError("model config: truncation must be token|utterance");
    }
    if (j.contains("init_std")) c.init_std = j["init_std"].get<double>();
    return c;
}

}  // namespace dialogxl::detail
