#include "dialogxl/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <sstream>

#include "config_json.hpp"
#include "dialogxl/errors.hpp"
#include "dialogxl/optim.hpp"
#include "dialogxl/tape.hpp"

namespace dialogxl {

using nlohmann::json;

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("train config: epochs must be >= 0");
    if (batch_size <= 0) throw ConfigError("train config: batch_size must be positive");
    if (lr <= 0.0) throw ConfigError("train config: learning rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("train config: weight decay must be >= 0");
    if (metric == MetricKind::micro_f1 && exclude_label.empty()) {
        // allowed: micro over all labels
    }
}

TrainConfig train_config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw DataError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("config '" + path + "': invalid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw DataError("config '" + path + "': expected a flat JSON object");

    TrainConfig cfg;
    json model_keys = json::object();
    for (const auto& [key, value] : j.items()) {
        if (key == "train") cfg.train_path = value.get<std::string>();
        else if (key == "val") cfg.val_path = value.get<std::string>();
        else if (key == "epochs") cfg.epochs = value.get<int>();
        else if (key == "batch_size") cfg.batch_size = value.get<int>();
        else if (key == "lr") cfg.lr = value.get<double>();
        else if (key == "weight_decay") cfg.weight_decay = value.get<double>();
        else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else if (key == "patience") cfg.patience = value.get<int>();
        else if (key == "metric") cfg.metric = metric_from_name(value.get<std::string>());
        else if (key == "exclude_label") cfg.exclude_label = value.get<std::string>();
        else if (key == "checkpoint_out") cfg.checkpoint_out = value.get<std::string>();
        else if (key == "log_out") cfg.log_out = value.get<std::string>();
        else model_keys[key] = value;
    }
    cfg.model = detail::model_config_from_json(model_keys, cfg.model);
    return cfg;
}

namespace {

std::string format_log(const std::vector<EpochLog>& log, MetricKind metric) {
    std::ostringstream os;
    os << "epoch,train_loss," << metric_name(metric) << "\n";
    char buf[64];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_metric);
        os << buf;
    }
    return os.str();
}

std::optional<int> resolve_excluded(const LabelSet& labels, const std::string& name) {
    if (name.empty()) return std::nullopt;
    return labels.id(name);
}

struct Snapshot {
    std::vector<std::pair<std::string, std::vector<double>>> values;
};

Snapshot take_snapshot(const DialogXLModel& model) {
    Snapshot s;
    for (const auto& [name, p] : model.named_parameters()) {
        s.values.emplace_back(name, std::vector<double>(p.data().begin(), p.data().end()));
    }
    return s;
}

void restore_snapshot(DialogXLModel& model, const Snapshot& s) {
    auto params = model.named_parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto dst = params[i].second.data_mut();
        const auto& src = s.values[i].second;
        for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k];
    }
}

}  // namespace

EvalReport evaluate(const DialogXLModel& model, const Dataset& data,
                    std::optional<int> excluded_label) {
    std::vector<int> gold, pred;
    std::vector<LabelRule> rules;
    RelProjectionCache proj_cache;  // parameters are fixed for the whole pass
    ForwardOptions fo;
    fo.proj_cache = &proj_cache;
    for (const Conversation& conv : data.conversations) {
        MemoryBank bank = model.make_memory();
        for (std::size_t t = 0; t < conv.utterances.size(); ++t) {
            const Utterance& u = conv.utterances[t];
            auto fw = model.forward_utterance(bank, u, static_cast<int>(t), fo);
            if (!u.label.has_value()) continue;
            gold.push_back(*u.label);
            pred.push_back(fw.prediction.label);
            rules.push_back(u.rule);
        }
    }
    // labels for the report come from the data's label set
    return compute_eval_report(gold, pred, rules, data.labels, excluded_label);
}

TrainResult train_on(const Dataset& train, const Dataset& val, const TrainConfig& cfg) {
    cfg.validate();
    if (train.conversations.empty()) throw DataError("train: empty training dataset");
    if (val.conversations.empty()) throw DataError("train: empty validation dataset");

    ModelConfig mc = cfg.model;
    mc.vocab_size = train.vocab.size();
    mc.n_labels = train.labels.size();
    if (mc.mode == SpeakerMode::speaker_embedding) mc.n_speakers = train.speakers.size();

    Rng rng(cfg.seed);
    TrainResult result;
    result.model = std::make_unique<DialogXLModel>(mc, rng);
    result.vocab = train.vocab;
    result.labels = train.labels;
    result.speakers = train.speakers;
    DialogXLModel& model = *result.model;

    const std::optional<int> excluded = resolve_excluded(train.labels, cfg.exclude_label);

    AdamW opt(model.named_parameters(),
              {.lr = cfg.lr, .weight_decay = cfg.weight_decay});

    auto validate_now = [&]() {
        return metric_value(evaluate(model, val, excluded), cfg.metric);
    };

    double best = validate_now();
    result.best_epoch = 0;
    result.log.push_back({0, 0.0, best});
    Snapshot best_snapshot = take_snapshot(model);

    std::vector<std::size_t> order(train.conversations.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    int since_best = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t loss_terms = 0;

        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            Tape tape;
            TapeScope scope(tape);
            RelProjectionCache proj_cache;  // valid for this step's tape only
            std::vector<std::pair<Tensor, int>> items;
            for (std::size_t bi = start; bi < end; ++bi) {
                const Conversation& conv = train.conversations[order[bi]];
                MemoryBank bank = model.make_memory();
                for (std::size_t t = 0; t < conv.utterances.size(); ++t) {
                    const Utterance& u = conv.utterances[t];
                    ForwardOptions fo;
                    fo.training = true;
                    fo.rng = &rng;
                    fo.proj_cache = &proj_cache;
                    auto fw = model.forward_utterance(bank, u, static_cast<int>(t), fo);
                    if (u.label.has_value()) items.emplace_back(fw.prob_row, *u.label);
                }
            }
            if (items.empty()) continue;
            Tensor loss = sequence_loss(items, mc.literal_loss);
            const double loss_val = loss.item();
            if (!std::isfinite(loss_val)) {
                throw NumericError("train: nonfinite loss at epoch " + std::to_string(epoch) +
                                   " (step " + std::to_string(start / cfg.batch_size) + ")");
            }
            backward(tape, loss);
            opt.step();
            opt.zero_grad();
            loss_sum += loss_val * static_cast<double>(items.size());
            loss_terms += items.size();
        }

        const double train_loss = loss_terms == 0 ? 0.0 : loss_sum / static_cast<double>(loss_terms);
        const double metric = validate_now();
        result.log.push_back({epoch, train_loss, metric});

        if (metric > best) {
            best = metric;
            result.best_epoch = epoch;
            best_snapshot = take_snapshot(model);
            since_best = 0;
        } else {
            since_best += 1;
            if (cfg.patience > 0 && since_best >= cfg.patience) break;
        }
    }

    restore_snapshot(model, best_snapshot);
    result.best_metric = best;
    result.log_text = format_log(result.log, cfg.metric);
    return result;
}

TrainResult train(const TrainConfig& cfg) {
    if (cfg.train_path.empty() || cfg.val_path.empty()) {
        throw ConfigError("train: both train and val dataset paths are required");
    }
    Dataset train_ds = load_conversations(cfg.train_path);
    Dataset val_ds = load_conversations(cfg.val_path, &train_ds.vocab, &train_ds.labels);
    val_ds.speakers = train_ds.speakers;

    TrainResult result = train_on(train_ds, val_ds, cfg);
    if (!cfg.checkpoint_out.empty()) {
        save_checkpoint(cfg.checkpoint_out, *result.model, result.vocab, result.labels,
                        result.speakers);
    }
    if (!cfg.log_out.empty()) {
        std::ofstream os(cfg.log_out);
        if (!os.is_open()) throw DataError("cannot write log '" + cfg.log_out + "'");
        os << result.log_text;
    }
    return result;
}

std::vector<MemorySweepRow> analyze_memory(const Dataset& data,
                                           const std::vector<std::size_t>& sweep, int batch_size) {
    if (batch_size <= 0) throw ConfigError("analyze_memory: batch size must be positive");
    std::vector<MemorySweepRow> rows;
    for (std::size_t max_len : sweep) {
        MemorySweepRow row{};
        row.max_len = max_len;

        // utterance recurrence: per-conversation banks, no padding ever
        double utt_context_sum = 0.0;
        std::size_t queries = 0;
        for (const Conversation& conv : data.conversations) {
            std::size_t len = 0;
            for (const Utterance& u : conv.utterances) {
                utt_context_sum += static_cast<double>(len);
                queries += 1;
                len = std::min(len + u.tokens.size(), max_len);
            }
        }
        row.utterance_waste = 0.0;
        row.utterance_context = queries == 0 ? 0.0 : utt_context_sum / static_cast<double>(queries);

        // segment recurrence: rows padded to the batch-wide longest utterance
        double seg_context_sum = 0.0;
        std::size_t seg_pads = 0, seg_slots = 0;
        for (std::size_t start = 0; start < data.conversations.size();
             start += static_cast<std::size_t>(batch_size)) {
            const std::size_t end = std::min(data.conversations.size(),
                                             start + static_cast<std::size_t>(batch_size));
            std::size_t max_seq = 1;
            for (std::size_t c = start; c < end; ++c) {
                for (const Utterance& u : data.conversations[c].utterances) {
                    max_seq = std::max(max_seq, u.tokens.size());
                }
            }
            for (std::size_t c = start; c < end; ++c) {
                SegmentMemory seg(1, 1, max_len);
                for (const Utterance& u : data.conversations[c].utterances) {
                    seg_context_sum += seg.length() == 0
                                           ? 0.0
                                           : static_cast<double>(seg.real_count());
                    std::vector<std::uint8_t> pad(max_seq, 0);
                    for (std::size_t i = u.tokens.size(); i < max_seq; ++i) pad[i] = 1;
                    seg.update(0, Tensor::zeros({max_seq, 1}), pad);
                    seg.truncate();
                }
                seg_pads += seg.pad_count();
                seg_slots += seg.length();
            }
        }
        row.segment_waste =
            seg_slots == 0 ? 0.0 : static_cast<double>(seg_pads) / static_cast<double>(seg_slots);
        row.segment_context = queries == 0 ? 0.0 : seg_context_sum / static_cast<double>(queries);
        rows.push_back(row);
    }
    return rows;
}

std::string memory_report_csv(const std::vector<MemorySweepRow>& rows) {
    std::ostringstream os;
    os << "max_len,utterance_waste,segment_waste,utterance_context_tokens,segment_context_tokens\n";
    char buf[160];
    for (const MemorySweepRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.3f,%.3f\n", r.max_len, r.utterance_waste,
                      r.segment_waste, r.utterance_context, r.segment_context);
        os << buf;
    }
    return os.str();
}

HeadAllocation ablated_allocation(HeadAllocation base, const std::string& removal) {
    HeadAllocation a = base;
    auto drop_to_global = [&](int& field) {
        a.global += field;
        field = 0;
    };
    if (removal == "control" || removal.empty()) return a;
    if (removal == "speaker") drop_to_global(a.speaker);
    else if (removal == "listener") drop_to_global(a.listener);
    else if (removal == "speaker&listener") {
        drop_to_global(a.speaker);
        drop_to_global(a.listener);
    } else if (removal == "local") drop_to_global(a.local);
    else if (removal == "global") {
        if (base.local + base.speaker + base.listener == 0) {
            throw ConfigError("ablate: removing global self-attention would remove every head type");
        }
        // nothing to move the budget "up" to; fold it into local instead
        a.local += a.global;
        a.global = 0;
    } else {
        throw ConfigError("ablate: unknown removal '" + removal +
                          "' (global|local|speaker|listener|speaker&listener)");
    }
    if (a.total() != base.total()) throw ConfigError("ablate: head budget changed");
    if (a.global == 0 && a.local == 0 && a.speaker == 0 && a.listener == 0) {
        throw ConfigError("ablate: removing every head type leaves no attention");
    }
    return a;
}

std::vector<AblationRow> ablate(const Dataset& train, const Dataset& val, const TrainConfig& base,
                                const std::vector<std::string>& removals, int runs, int jobs) {
    if (runs <= 0) throw ConfigError("ablate: runs must be positive");
    for (const std::string& r : removals) {
        (void)ablated_allocation(base.model.heads, r);  // validate early
    }

    std::vector<std::string> variants = {"control"};
    variants.insert(variants.end(), removals.begin(), removals.end());

    struct Job {
        std::size_t variant;
        int run;
    };
    std::vector<Job> jobs_list;
    for (std::size_t v = 0; v < variants.size(); ++v)
        for (int r = 0; r < runs; ++r) jobs_list.push_back({v, r});

    std::vector<double> metrics(jobs_list.size(), 0.0);
    auto run_job = [&](std::size_t idx) {
        const Job& jb = jobs_list[idx];
        TrainConfig cfg = base;
        cfg.model.heads = ablated_allocation(base.model.heads, variants[jb.variant]);
        cfg.seed = base.seed + static_cast<std::uint64_t>(jb.run);
        TrainResult res = train_on(train, val, cfg);
        metrics[idx] = res.best_metric;
    };

    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(jobs_list.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < jobs_list.size(); ++i) run_job(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::future<void>> futures;
        for (int w = 0; w < workers; ++w) {
            futures.push_back(std::async(std::launch::async, [&]() {
                while (true) {
                    const std::size_t idx = next.fetch_add(1);
                    if (idx >= jobs_list.size()) return;
                    run_job(idx);
                }
            }));
        }
        for (auto& f : futures) f.get();
    }

    std::vector<AblationRow> rows;
    double control_mean = 0.0;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        double sum = 0.0;
        for (std::size_t i = 0; i < jobs_list.size(); ++i) {
            if (jobs_list[i].variant == v) sum += metrics[i];
        }
        const double mean = sum / static_cast<double>(runs);
        if (v == 0) control_mean = mean;
        rows.push_back({variants[v], mean, control_mean - mean, runs});
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "variant,mean_metric,delta_vs_control,runs\n";
    char buf[160];
    for (const AblationRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%d\n", r.variant.c_str(), r.mean_metric,
                      r.delta_vs_control, r.runs);
        os << buf;
    }
    return os.str();
}

void dump_masks(const Dataset& data, const std::string& conversation_id, int t, int window,
                const std::string& out_path) {
    const Conversation* conv = nullptr;
    for (const Conversation& c : data.conversations) {
        if (c.conversation_id == conversation_id) conv = &c;
    }
    if (conv == nullptr) throw DataError("dump_masks: no conversation '" + conversation_id + "'");
    if (t < 1 || static_cast<std::size_t>(t) > conv->utterances.size()) {
        throw DataError("dump_masks: t " + std::to_string(t) + " outside [1," +
                        std::to_string(conv->utterances.size()) + "]");
    }
    const int qt = t - 1;  // to 0-based
    const Utterance& u = conv->utterances[static_cast<std::size_t>(qt)];

    std::vector<MemSlotMeta> meta;
    for (int k = 0; k < qt; ++k) {
        const Utterance& h = conv->utterances[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < h.tokens.size(); ++i) meta.push_back({k, h.speaker_id});
    }
    AttentionMaskSet masks = build_mask_set(u.tokens.size(), meta, window, qt, u.speaker_id);

    json j;
    j["conversation_id"] = conversation_id;
    j["t"] = t;
    j["window"] = window == kUnboundedWindow ? -1 : window;

    json rows = json::array();
    rows.push_back({{"position", 0}, {"token", "[CLS]"}});
    for (std::size_t i = 0; i < u.tokens.size(); ++i) {
        rows.push_back({{"position", i + 1}, {"token", data.vocab.token(u.tokens[i])}});
    }
    j["query_rows"] = std::move(rows);

    json cols = json::array();
    {
        std::size_t pos = 0;
        for (int k = 0; k < qt; ++k) {
            const Utterance& h = conv->utterances[static_cast<std::size_t>(k)];
            for (int tok : h.tokens) {
                cols.push_back({{"position", pos++},
                                {"utterance", k},
                                {"speaker", h.speaker_name},
                                {"token", data.vocab.token(tok)},
                                {"current", false}});
            }
        }
        cols.push_back({{"position", pos++},
                        {"utterance", qt},
                        {"speaker", u.speaker_name},
                        {"token", "[CLS]"},
                        {"current", true}});
        for (int tok : u.tokens) {
            cols.push_back({{"position", pos++},
                            {"utterance", qt},
                            {"speaker", u.speaker_name},
                            {"token", data.vocab.token(tok)},
                            {"current", true}});
        }
    }
    j["key_cols"] = std::move(cols);

    json jm = json::object();
    for (HeadType type : {HeadType::global, HeadType::local, HeadType::speaker, HeadType::listener}) {
        const MaskMatrix& m = masks.for_type(type);
        json rows_out = json::array();
        for (std::size_t r = 0; r < m.query_rows; ++r) {
            json row = json::array();
            for (std::size_t c = 0; c < m.key_cols; ++c) row.push_back(m.at(r, c) ? 1 : 0);
            rows_out.push_back(std::move(row));
        }
        jm[head_type_name(type)] = std::move(rows_out);
    }
    j["masks"] = std::move(jm);

    std::ofstream os(out_path);
    if (!os.is_open()) throw DataError("cannot write mask dump '" + out_path + "'");
    os << j.dump(2) << "\n";
}

AttentionMaskSet read_mask_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw DataError("cannot open mask dump '" + path + "'");
    json j;
    in >> j;
    AttentionMaskSet s;
    const long long w = j["window"].get<long long>();
    s.window = w < 0 ? kUnboundedWindow : static_cast<int>(w);
    for (HeadType type : {HeadType::global, HeadType::local, HeadType::speaker, HeadType::listener}) {
        const json& rows = j["masks"][head_type_name(type)];
        MaskMatrix m;
        m.query_rows = rows.size();
        m.key_cols = rows.empty() ? 0 : rows[0].size();
        m.masked.reserve(m.query_rows * m.key_cols);
        for (const auto& row : rows) {
            for (const auto& cell : row) m.masked.push_back(cell.get<int>() != 0 ? 1 : 0);
        }
        switch (type) {
            case HeadType::global: s.global = std::move(m); break;
            case HeadType::local: s.local = std::move(m); break;
            case HeadType::speaker: s.speaker = std::move(m); break;
            case HeadType::listener: s.listener = std::move(m); break;
        }
    }
    return s;
}

}  // namespace dialogxl
