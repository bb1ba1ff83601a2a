#include "dialogxl/checkpoint.hpp"

#include <fstream>
#include <set>

#include "config_json.hpp"
#include "dialogxl/errors.hpp"

namespace dialogxl {

using nlohmann::json;

void save_checkpoint(const std::string& path, const DialogXLModel& model, const Vocabulary& vocab,
                     const LabelSet& labels, const std::vector<std::string>& speakers) {
    json j;
    j["format"] = "dialogxl-checkpoint";
    j["version"] = kCheckpointVersion;
    j["config"] = detail::model_config_to_json(model.config());

    json jv = json::object();
    for (std::size_t i = 0; i < vocab.size(); ++i) jv[vocab.token(static_cast<int>(i))] = i;
    j["vocabulary"] = std::move(jv);

    json jl = json::object();
    for (std::size_t i = 0; i < labels.size(); ++i) jl[labels.name(static_cast<int>(i))] = i;
    j["labels"] = std::move(jl);

    j["speakers"] = speakers;

    json jt = json::object();
    for (const auto& [name, p] : model.named_parameters()) {
        json entry;
        entry["shape"] = p.shape();
        entry["data"] = std::vector<double>(p.data().begin(), p.data().end());
        jt[name] = std::move(entry);
    }
    j["tensors"] = std::move(jt);

    std::ofstream os(path);
    if (!os.is_open()) throw DataError("cannot write checkpoint '" + path + "'");
    os << j.dump() << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw DataError("cannot open checkpoint '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("checkpoint '" + path + "': invalid JSON: " + std::string(e.what()));
    }
    if (!j.contains("format") || j["format"] != "dialogxl-checkpoint") {
        throw DataError("checkpoint '" + path + "': not a dialogxl checkpoint");
    }
    if (j["version"].get<int>() != kCheckpointVersion) {
        throw DataError("checkpoint '" + path + "': unsupported version " +
                        std::to_string(j["version"].get<int>()));
    }

    LoadedCheckpoint out;
    const ModelConfig cfg = detail::model_config_from_json(j["config"]);

    {
        std::vector<std::string> by_id(j["vocabulary"].size());
        for (const auto& [token, id] : j["vocabulary"].items()) by_id.at(id.get<std::size_t>()) = token;
        for (std::size_t i = 3; i < by_id.size(); ++i) out.vocab.add(by_id[i]);
    }
    {
        std::vector<std::string> by_id(j["labels"].size());
        for (const auto& [name, id] : j["labels"].items()) by_id.at(id.get<std::size_t>()) = name;
        for (const std::string& n : by_id) out.labels.add(n);
    }
    out.speakers = j["speakers"].get<std::vector<std::string>>();

    Rng scratch_rng(0);
    out.model = std::make_unique<DialogXLModel>(cfg, scratch_rng);
    for (auto& [name, p] : out.model->named_parameters()) {
        if (!j["tensors"].contains(name)) {
            throw DataError("checkpoint '" + path + "': missing tensor '" + name + "'");
        }
        const json& entry = j["tensors"][name];
        const Shape shape = entry["shape"].get<Shape>();
        if (shape != p.shape()) {
            throw DataError("checkpoint '" + path + "': tensor '" + name + "' has shape " +
                            shape_str(shape) + ", expected " + shape_str(p.shape()));
        }
        const std::vector<double> data = entry["data"].get<std::vector<double>>();
        auto dst = p.data_mut();
        if (data.size() != dst.size()) {
            throw DataError("checkpoint '" + path + "': tensor '" + name + "' size mismatch");
        }
        for (std::size_t i = 0; i < data.size(); ++i) dst[i] = data[i];
    }
    return out;
}

}  // namespace dialogxl
