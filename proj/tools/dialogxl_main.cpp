#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dialogxl/checkpoint.hpp"
#include "dialogxl/errors.hpp"
#include "dialogxl/synth.hpp"
#include "dialogxl/trainer.hpp"

using namespace dialogxl;

namespace {

// exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure

std::pair<int, int> parse_range(const std::string& s, const char* what) {
    int lo, hi;
    char colon;
    std::istringstream is(s);
    if (!(is >> lo >> colon >> hi) || colon != ':') {
        throw ConfigError(std::string(what) + ": expected lo:hi, got '" + s + "'");
    }
    return {lo, hi};
}

std::vector<std::size_t> parse_sweep(const std::string& s) {
    long long start, stop, step;
    char c1, c2;
    std::istringstream is(s);
    if (!(is >> start >> c1 >> stop >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0 ||
        start <= 0 || stop < start) {
        throw ConfigError("sweep: expected start:stop:step, got '" + s + "'");
    }
    std::vector<std::size_t> out;
    for (long long v = start; v <= stop; v += step) out.push_back(static_cast<std::size_t>(v));
    return out;
}

std::array<double, 3> parse_mix(const std::string& s) {
    std::array<double, 3> mix{};
    char c1, c2;
    std::istringstream is(s);
    if (!(is >> mix[0] >> c1 >> mix[1] >> c2 >> mix[2]) || c1 != ',' || c2 != ',') {
        throw ConfigError("mix: expected local,intra,inter, got '" + s + "'");
    }
    return mix;
}

std::string with_run_suffix(const std::string& path, int run, int runs) {
    if (runs <= 1 || path.empty()) return path;
    return path + ".seed" + std::to_string(run);
}

int cmd_train(const std::string& config_path, std::int64_t seed_override, int runs) {
    TrainConfig base = train_config_from_file(config_path);
    if (seed_override >= 0) base.seed = static_cast<std::uint64_t>(seed_override);
    if (runs <= 0) throw ConfigError("train: --runs must be positive");

    Dataset train_ds = load_conversations(base.train_path);
    Dataset val_ds = load_conversations(base.val_path, &train_ds.vocab, &train_ds.labels);
    val_ds.speakers = train_ds.speakers;

    double metric_sum = 0.0;
    for (int r = 0; r < runs; ++r) {
        TrainConfig cfg = base;
        cfg.seed = base.seed + static_cast<std::uint64_t>(r);
        TrainResult res = train_on(train_ds, val_ds, cfg);
        metric_sum += res.best_metric;

        const std::string ckpt = with_run_suffix(base.checkpoint_out, r, runs);
        if (!ckpt.empty()) {
            save_checkpoint(ckpt, *res.model, res.vocab, res.labels, res.speakers);
        }
        const std::string log = with_run_suffix(base.log_out, r, runs);
        if (!log.empty()) {
            std::ofstream os(log);
            if (!os.is_open()) throw DataError("cannot write log '" + log + "'");
            os << res.log_text;
        }
        std::printf("run %d (seed %llu): best %s %.6f at epoch %d\n", r,
                    static_cast<unsigned long long>(cfg.seed), metric_name(base.metric),
                    res.best_metric, res.best_epoch);
    }
    if (runs > 1) {
        std::printf("mean %s over %d runs: %.6f\n", metric_name(base.metric), runs,
                    metric_sum / runs);
    }
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, const std::string& metric,
             const std::string& exclude, const std::string& out_path) {
    LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    Dataset data = load_conversations(data_path, &ckpt.vocab, &ckpt.labels);
    std::optional<int> excluded;
    if (!exclude.empty()) excluded = ckpt.labels.id(exclude);
    EvalReport report = evaluate(*ckpt.model, data, excluded);

    std::ostringstream os;
    os << report.to_csv() << "\n" << report.confusion_csv();
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f.is_open()) throw DataError("cannot write report '" + out_path + "'");
        f << os.str();
    } else {
        std::cout << os.str();
    }
    const MetricKind kind = metric_from_name(metric);
    std::printf("%s: %.6f\n", metric_name(kind), metric_value(report, kind));
    return 0;
}

int cmd_synth(std::uint64_t seed, const std::string& out, const std::string& mix, int conversations,
              const std::string& speakers, const std::string& length, const std::string& filler,
              bool long_tail) {
    SynthOptions opt;
    opt.seed = seed;
    opt.conversations = conversations;
    const auto m = parse_mix(mix);
    opt.mix_local = m[0];
    opt.mix_intra = m[1];
    opt.mix_inter = m[2];
    std::tie(opt.speakers_min, opt.speakers_max) = parse_range(speakers, "speakers");
    std::tie(opt.utterances_min, opt.utterances_max) = parse_range(length, "length");
    std::tie(opt.filler_min, opt.filler_max) = parse_range(filler, "filler");
    opt.long_tail = long_tail;
    Dataset ds = synth_generate(opt);
    save_conversations(out, ds.conversations);
    std::printf("wrote %zu conversations (%zu utterances) to %s\n", ds.conversations.size(),
                ds.total_utterances(), out.c_str());
    return 0;
}

int cmd_analyze_memory(const std::string& data_path, const std::string& sweep, int batch,
                       const std::string& out_path) {
    Dataset data = load_conversations(data_path);
    const auto rows = analyze_memory(data, parse_sweep(sweep), batch);
    const std::string csv = memory_report_csv(rows);
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f.is_open()) throw DataError("cannot write report '" + out_path + "'");
        f << csv;
    } else {
        std::cout << csv;
    }
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& remove, int runs, int jobs,
               const std::string& out_path) {
    TrainConfig base = train_config_from_file(config_path);
    std::vector<std::string> removals;
    std::stringstream ss(remove);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "speaker&listener" || item == "speaker+listener") item = "speaker&listener";
        if (!item.empty()) removals.push_back(item);
    }
    Dataset train_ds = load_conversations(base.train_path);
    Dataset val_ds = load_conversations(base.val_path, &train_ds.vocab, &train_ds.labels);
    val_ds.speakers = train_ds.speakers;

    const auto rows = ablate(train_ds, val_ds, base, removals, runs, jobs);
    const std::string csv = ablation_csv(rows);
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f.is_open()) throw DataError("cannot write report '" + out_path + "'");
        f << csv;
    } else {
        std::cout << csv;
    }
    return 0;
}

int cmd_dump_masks(const std::string& data_path, const std::string& conversation, int t, int window,
                   const std::string& out) {
    Dataset data = load_conversations(data_path);
    dump_masks(data, conversation, t, window < 0 ? kUnboundedWindow : window, out);
    std::printf("wrote mask dump for %s t=%d to %s\n", conversation.c_str(), t, out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"utterance-recurrence memory and dialog-aware attention toolkit"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model from a JSON config");
    std::string train_config;
    std::int64_t train_seed = -1;
    int train_runs = 1;
    train_cmd->add_option("--config", train_config, "flat JSON config file")->required();
    train_cmd->add_option("--seed", train_seed, "seed override");
    train_cmd->add_option("--runs", train_runs, "number of seeded runs (seed, seed+1, ...)");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string eval_ckpt, eval_data, eval_metric = "weighted_f1", eval_exclude, eval_out;
    eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
    eval_cmd->add_option("--data", eval_data)->required();
    eval_cmd->add_option("--metric", eval_metric, "weighted_f1|micro_f1|accuracy");
    eval_cmd->add_option("--exclude-label", eval_exclude, "label excluded from micro-F1");
    eval_cmd->add_option("--out", eval_out, "write the report CSV here");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled dialog dataset");
    std::uint64_t synth_seed = 0;
    std::string synth_out, synth_mix = "1,0,0";
    int synth_conversations = 100;
    std::string synth_speakers = "2:4", synth_length = "4:12", synth_filler = "0:2";
    bool synth_long_tail = false;
    synth_cmd->add_option("--seed", synth_seed);
    synth_cmd->add_option("--out", synth_out)->required();
    synth_cmd->add_option("--mix", synth_mix, "local,intra,inter probabilities");
    synth_cmd->add_option("--conversations", synth_conversations);
    synth_cmd->add_option("--speakers", synth_speakers, "speaker count range lo:hi (within 2..4)");
    synth_cmd->add_option("--length", synth_length, "utterances per conversation lo:hi");
    synth_cmd->add_option("--filler", synth_filler, "filler tokens per utterance lo:hi");
    synth_cmd->add_flag("--long-tail", synth_long_tail,
                        "skewed utterance lengths (mean/max 0.35) for memory studies");

    // analyze-memory
    auto* mem_cmd = app.add_subcommand("analyze-memory", "memory waste/context sweep report");
    std::string mem_data, mem_sweep = "100:1000:100", mem_out;
    int mem_batch = 4;
    mem_cmd->add_option("--data", mem_data)->required();
    mem_cmd->add_option("--sweep", mem_sweep, "max memory lengths start:stop:step");
    mem_cmd->add_option("--batch", mem_batch, "conversations per batch");
    mem_cmd->add_option("--out", mem_out, "write the CSV here");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "train head-type ablation arms");
    std::string ablate_config, ablate_remove, ablate_out;
    int ablate_runs = 1, ablate_jobs = 1;
    ablate_cmd->add_option("--config", ablate_config)->required();
    ablate_cmd->add_option("--remove", ablate_remove,
                           "comma list of global|local|speaker|listener|speaker&listener")
        ->required();
    ablate_cmd->add_option("--runs", ablate_runs, "seeded runs per arm");
    ablate_cmd->add_option("--jobs", ablate_jobs, "parallel training jobs");
    ablate_cmd->add_option("--out", ablate_out, "write the CSV here");

    // dump-masks
    auto* dump_cmd = app.add_subcommand("dump-masks", "write the four attention masks for one query");
    std::string dump_data, dump_conv, dump_out;
    int dump_t = 1, dump_window = 2;
    dump_cmd->add_option("--data", dump_data)->required();
    dump_cmd->add_option("--conversation", dump_conv)->required();
    dump_cmd->add_option("--t", dump_t, "query utterance, 1-based")->required();
    dump_cmd->add_option("--window", dump_window, "local window (negative = unbounded)");
    dump_cmd->add_option("--out", dump_out)->required();

    try {
        app.parse(argc, argv);
        if (train_cmd->parsed()) return cmd_train(train_config, train_seed, train_runs);
        if (eval_cmd->parsed())
            return cmd_eval(eval_ckpt, eval_data, eval_metric, eval_exclude, eval_out);
        if (synth_cmd->parsed())
            return cmd_synth(synth_seed, synth_out, synth_mix, synth_conversations, synth_speakers,
                             synth_length, synth_filler, synth_long_tail);
        if (mem_cmd->parsed()) return cmd_analyze_memory(mem_data, mem_sweep, mem_batch, mem_out);
        if (ablate_cmd->parsed())
            return cmd_ablate(ablate_config, ablate_remove, ablate_runs, ablate_jobs, ablate_out);
        if (dump_cmd->parsed())
            return cmd_dump_masks(dump_data, dump_conv, dump_t, dump_window, dump_out);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
