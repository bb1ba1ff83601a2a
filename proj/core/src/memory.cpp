#include "dialogxl/memory.hpp"

#include <cmath>

#include "dialogxl/errors.hpp"
#include "json.hpp"

namespace dialogxl {

using nlohmann::json;

MemoryBank::MemoryBank(std::size_t n_layers, std::size_t d_model, std::size_t max_len,
                       TruncationGranularity granularity)
    : d_model_(d_model), max_len_(max_len), granularity_(granularity), hidden_(n_layers) {
    if (n_layers == 0 || d_model == 0) {
        throw ConfigError("memory bank: layers and model width must be positive");
    }
}

int MemoryBank::last_utterance_index() const { return last_utterance_; }

Tensor MemoryBank::layer(std::size_t l) const {
    if (l >= hidden_.size()) {
        throw ConfigError("memory bank: layer " + std::to_string(l) + " out of range [0," +
                          std::to_string(hidden_.size()) + ")");
    }
    return Tensor::from_data({hidden_[l].size() / d_model_, d_model_},
                             std::vector<double>(hidden_[l]));
}

void MemoryBank::update(std::size_t layer, const Tensor& h, int utterance_index, int speaker_id) {
    if (layer >= hidden_.size()) {
        throw ConfigError("memory bank: layer " + std::to_string(layer) + " out of range [0," +
                          std::to_string(hidden_.size()) + ")");
    }
    if (h.ndim() != 2 || h.cols() != d_model_ || h.rows() < 2) {
        throw DimensionError("memory bank update: hidden " + shape_str(h.shape()) +
                             " must be [(1+n_t) x " + std::to_string(d_model_) + "] with n_t >= 1");
    }
    const std::size_t n_t = h.rows() - 1;  // row 0 is [CLS], never cached
    const std::size_t expected = hidden_[layer].size() / d_model_;

    if (layer == 0) {
        if (utterance_index <= last_utterance_) {
            throw SequencingError("memory bank: utterance " + std::to_string(utterance_index) +
                                  " after " + std::to_string(last_utterance_));
        }
        if (expected != meta_.size()) {
            throw NumericError("memory bank: meta/hidden length divergence at layer 0");
        }
        for (std::size_t i = 0; i < n_t; ++i) meta_.push_back({utterance_index, speaker_id});
        last_utterance_ = utterance_index;
    } else {
        if (expected + n_t != meta_.size()) {
            throw NumericError("memory bank: meta/hidden length divergence at layer " +
                               std::to_string(layer));
        }
    }

    const auto hv = h.data();
    auto& buf = hidden_[layer];
    buf.insert(buf.end(), hv.begin() + static_cast<std::ptrdiff_t>(d_model_), hv.end());
}

std::size_t MemoryBank::truncate() {
    for (std::size_t l = 1; l < hidden_.size(); ++l) {
        if (hidden_[l].size() != hidden_[0].size()) {
            throw NumericError("memory bank: layers out of sync before truncate");
        }
    }
    if (max_len_ == kUnbounded || meta_.size() <= max_len_) return 0;

    std::size_t drop = meta_.size() - max_len_;
    if (granularity_ == TruncationGranularity::utterance) {
        // extend the drop to the end of the utterance block it lands in
        while (drop < meta_.size() && meta_[drop].utterance_index == meta_[drop - 1].utterance_index) {
            ++drop;
        }
    }
    meta_.erase(meta_.begin(), meta_.begin() + static_cast<std::ptrdiff_t>(drop));
    for (auto& buf : hidden_) {
        buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(drop * d_model_));
    }
    return drop;
}

void MemoryBank::reset() {
    for (auto& buf : hidden_) buf.clear();
    meta_.clear();
    last_utterance_ = -1;
}

void MemoryBank::restore(const std::vector<Tensor>& layer_hidden, std::vector<MemSlotMeta> meta,
                         int last_utterance) {
    if (layer_hidden.size() != hidden_.size()) {
        throw DimensionError("memory bank restore: " + std::to_string(layer_hidden.size()) +
                             " layers vs " + std::to_string(hidden_.size()));
    }
    for (const Tensor& t : layer_hidden) {
        if (t.numel() != meta.size() * d_model_) {
            throw DimensionError("memory bank restore: layer rows do not match metadata");
        }
    }
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        hidden_[l].assign(layer_hidden[l].data().begin(), layer_hidden[l].data().end());
    }
    meta_ = std::move(meta);
    last_utterance_ = last_utterance;
}

std::string MemoryBank::snapshot_json(bool with_checksums) const {
    json out;
    out["layers"] = hidden_.size();
    out["length"] = meta_.size();
    out["max_len"] = max_len_ == kUnbounded ? json(nullptr) : json(max_len_);

    json blocks = json::array();
    std::size_t i = 0;
    while (i < meta_.size()) {
        std::size_t j = i;
        while (j < meta_.size() && meta_[j].utterance_index == meta_[i].utterance_index) ++j;
        blocks.push_back({{"utterance_index", meta_[i].utterance_index},
                          {"speaker_id", meta_[i].speaker_id},
                          {"tokens", j - i}});
        i = j;
    }
    out["meta_blocks"] = std::move(blocks);

    if (with_checksums) {
        json sums = json::array();
        for (const auto& buf : hidden_) {
            double s = 0.0;
            for (double v : buf) s += v;
            sums.push_back(s);
        }
        out["layer_checksums"] = std::move(sums);
    }
    return out.dump();
}

SegmentMemory::SegmentMemory(std::size_t n_layers, std::size_t d_model, std::size_t max_len)
    : d_model_(d_model), max_len_(max_len), hidden_(n_layers) {
    if (n_layers == 0 || d_model == 0) {
        throw ConfigError("segment memory: layers and model width must be positive");
    }
}

std::size_t SegmentMemory::pad_count() const {
    std::size_t n = 0;
    for (std::uint8_t p : pad_mask_) n += p;
    return n;
}

void SegmentMemory::update(std::size_t layer, const Tensor& h_segment,
                           const std::vector<std::uint8_t>& pad_mask) {
    if (layer >= hidden_.size()) {
        throw ConfigError("segment memory: layer " + std::to_string(layer) + " out of range");
    }
    if (h_segment.ndim() != 2 || h_segment.cols() != d_model_ || h_segment.rows() != pad_mask.size()) {
        throw DimensionError("segment memory update: hidden " + shape_str(h_segment.shape()) +
                             " vs pad mask of " + std::to_string(pad_mask.size()));
    }
    const auto hv = h_segment.data();
    auto& buf = hidden_[layer];
    buf.insert(buf.end(), hv.begin(), hv.end());
    if (layer == 0) {
        pad_mask_.insert(pad_mask_.end(), pad_mask.begin(), pad_mask.end());
    }
}

std::size_t SegmentMemory::truncate() {
    if (pad_mask_.size() <= max_len_) return 0;
    const std::size_t drop = pad_mask_.size() - max_len_;
    pad_mask_.erase(pad_mask_.begin(), pad_mask_.begin() + static_cast<std::ptrdiff_t>(drop));
    for (auto& buf : hidden_) {
        if (buf.size() >= drop * d_model_) {
            buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(drop * d_model_));
        }
    }
    return drop;
}

double SegmentMemory::waste_rate() const {
    if (pad_mask_.empty()) throw NumericError("segment memory: waste rate of empty memory");
    return static_cast<double>(pad_count()) / static_cast<double>(pad_mask_.size());
}

}  // namespace dialogxl
