#include <cstdio>
#include <fstream>
#include <sstream>

#include "dialogxl/errors.hpp"
#include "dialogxl/synth.hpp"
#include "dialogxl/trainer.hpp"
#include "doctest.h"

using namespace dialogxl;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

LabelSet two_labels() {
    LabelSet ls;
    ls.add("A");
    ls.add("B");
    return ls;
}

TrainConfig tiny_train_config() {
    TrainConfig cfg;
    cfg.model.d_model = 16;
    cfg.model.n_layers = 2;
    cfg.model.n_heads = 4;
    cfg.model.heads = {1, 1, 1, 1};
    cfg.model.window = 2;
    cfg.model.max_memory = 200;
    cfg.epochs = 20;
    cfg.batch_size = 16;
    cfg.lr = 3e-3;
    cfg.seed = 7;
    cfg.patience = 4;
    cfg.metric = MetricKind::accuracy;
    return cfg;
}

}  // namespace

TEST_CASE("perfect predictions give unit F1 everywhere") {
    LabelSet ls = two_labels();
    EvalReport r = compute_eval_report({0, 1, 0}, {0, 1, 0}, {}, ls);
    for (double f : r.f1) CHECK(f == doctest::Approx(1.0));
    CHECK(r.weighted_f1 == doctest::Approx(1.0));
    CHECK(r.micro_f1 == doctest::Approx(1.0));
    CHECK(r.accuracy == doctest::Approx(1.0));
}

TEST_CASE("weighted F1 hand-counted example") {
    LabelSet ls = two_labels();
    // golds A,A,B,B; preds A,B,B,B
    EvalReport r = compute_eval_report({0, 0, 1, 1}, {0, 1, 1, 1}, {}, ls);
    CHECK(r.f1[0] == doctest::Approx(2.0 / 3.0));
    CHECK(r.f1[1] == doctest::Approx(4.0 / 5.0));
    CHECK(r.weighted_f1 == doctest::Approx(0.5 * (2.0 / 3.0) + 0.5 * (4.0 / 5.0)));
}

TEST_CASE("micro F1 with an excluded label") {
    LabelSet ls = two_labels();
    EvalReport r = compute_eval_report({0, 1}, {0, 1}, {}, ls, 1);
    CHECK(r.micro_f1 == doctest::Approx(1.0));

    // excluded label errors do not count; A-errors do
    EvalReport r2 = compute_eval_report({0, 1, 1}, {1, 0, 1}, {}, ls, 1);
    // included label A: tp=0, fp=1 (gold B pred A), fn=1 (gold A pred B)
    CHECK(r2.micro_f1 == doctest::Approx(0.0));
}

TEST_CASE("confusion row sums equal gold counts") {
    Rng rng(3);
    LabelSet ls;
    for (const char* n : {"a", "b", "c", "d"}) ls.add(n);
    std::vector<int> gold, pred;
    for (int i = 0; i < 200; ++i) {
        gold.push_back(rng.uniform_int(0, 3));
        pred.push_back(rng.uniform_int(0, 3));
    }
    EvalReport r = compute_eval_report(gold, pred, {}, ls);
    for (std::size_t l = 0; l < 4; ++l) {
        std::size_t row = 0;
        for (std::size_t p = 0; p < 4; ++p) row += r.confusion[l][p];
        CHECK(row == r.support[l]);
    }
}

TEST_CASE("metrics agree with a brute-force recount on random pairs") {
    Rng rng(11);
    LabelSet ls;
    for (const char* n : {"x", "y", "z"}) ls.add(n);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> gold, pred;
        const int n = rng.uniform_int(5, 60);
        for (int i = 0; i < n; ++i) {
            gold.push_back(rng.uniform_int(0, 2));
            pred.push_back(rng.uniform_int(0, 2));
        }
        EvalReport r = compute_eval_report(gold, pred, {}, ls, 2);

        // independent recount straight off the vectors
        double weighted = 0.0;
        std::size_t micro_tp = 0, micro_fp = 0, micro_fn = 0;
        for (int l = 0; l < 3; ++l) {
            std::size_t tp = 0, fp = 0, fn = 0, sup = 0;
            for (int i = 0; i < n; ++i) {
                if (gold[static_cast<std::size_t>(i)] == l) sup++;
                if (gold[static_cast<std::size_t>(i)] == l && pred[static_cast<std::size_t>(i)] == l) tp++;
                if (gold[static_cast<std::size_t>(i)] != l && pred[static_cast<std::size_t>(i)] == l) fp++;
                if (gold[static_cast<std::size_t>(i)] == l && pred[static_cast<std::size_t>(i)] != l) fn++;
            }
            const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
            const double rec = tp + fn ? double(tp) / double(tp + fn) : 0.0;
            const double f1 = p + rec > 0 ? 2 * p * rec / (p + rec) : 0.0;
            weighted += double(sup) / double(n) * f1;
            if (l != 2) {
                micro_tp += tp;
                micro_fp += fp;
                micro_fn += fn;
            }
        }
        CHECK(r.weighted_f1 == doctest::Approx(weighted).epsilon(1e-12));
        const double md = double(2 * micro_tp + micro_fp + micro_fn);
        CHECK(r.micro_f1 == doctest::Approx(md == 0 ? 0.0 : 2.0 * double(micro_tp) / md).epsilon(1e-12));
    }
}

TEST_CASE("zero epochs returns the initialized model and an epoch-0 log") {
    SynthOptions opt;
    opt.seed = 1;
    opt.conversations = 12;
    Dataset train = synth_generate(opt);
    opt.seed = 2;
    opt.conversations = 6;
    Dataset val = synth_generate(opt);

    TrainConfig cfg = tiny_train_config();
    cfg.epochs = 0;
    TrainResult res = train_on(train, val, cfg);
    REQUIRE(res.log.size() == 1);
    CHECK(res.log[0].epoch == 0);
    CHECK(res.best_epoch == 0);
}

TEST_CASE("training is deterministic per seed") {
    SynthOptions opt;
    opt.seed = 10;
    opt.conversations = 20;
    Dataset train = synth_generate(opt);
    opt.seed = 11;
    opt.conversations = 8;
    Dataset val = synth_generate(opt);

    TrainConfig cfg = tiny_train_config();
    cfg.epochs = 2;
    cfg.patience = 0;
    TrainResult a = train_on(train, val, cfg);
    TrainResult b = train_on(train, val, cfg);
    CHECK(a.log_text == b.log_text);

    const std::string pa = "/tmp/dialogxl_det_a.ckpt.json";
    const std::string pb = "/tmp/dialogxl_det_b.ckpt.json";
    save_checkpoint(pa, *a.model, a.vocab, a.labels, a.speakers);
    save_checkpoint(pb, *b.model, b.vocab, b.labels, b.speakers);
    CHECK(slurp(pa) == slurp(pb));
    std::remove(pa.c_str());
    std::remove(pb.c_str());
}

TEST_CASE("local-only task trains to high validation accuracy") {
    SynthOptions opt;
    opt.seed = 100;
    opt.conversations = 500;
    Dataset train = synth_generate(opt);
    opt.seed = 101;
    opt.conversations = 100;
    Dataset val = synth_generate(opt);

    TrainConfig cfg = tiny_train_config();
    TrainResult res = train_on(train, val, cfg);
    CHECK(res.best_metric >= 0.95);
}

TEST_CASE("nonfinite loss aborts with diagnostics") {
    SynthOptions opt;
    opt.seed = 20;
    opt.conversations = 6;
    Dataset train = synth_generate(opt);

    TrainConfig cfg = tiny_train_config();
    cfg.epochs = 3;
    cfg.lr = 1e18;  // drives the parameters to overflow
    CHECK_THROWS_AS(train_on(train, train, cfg), NumericError);
}

TEST_CASE("empty dataset is an error") {
    Dataset empty;
    TrainConfig cfg = tiny_train_config();
    CHECK_THROWS_AS(train_on(empty, empty, cfg), DataError);
}

TEST_CASE("analyze_memory waste arithmetic") {
    // four conversations of one utterance each with lengths 3,5,2,4;
    // batch 4 pads to 5
    std::vector<RawConversation> raw;
    const int lens[4] = {3, 5, 2, 4};
    for (int c = 0; c < 4; ++c) {
        RawConversation rc;
        rc.conversation_id = "c" + std::to_string(c);
        std::string text;
        for (int k = 0; k < lens[c]; ++k) text += "w" + std::to_string(k) + " ";
        rc.utterances.push_back({text, std::string("A"), std::nullopt, ""});
        raw.push_back(rc);
    }
    Dataset ds = build_dataset(raw);
    auto rows = analyze_memory(ds, {20, 100, 1000}, 4);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        CHECK(r.utterance_waste == 0.0);
        CHECK(r.segment_waste == doctest::Approx(1.0 - 14.0 / 20.0));
    }
}

TEST_CASE("analyze_memory matches the closed form without truncation") {
    SynthOptions opt;
    opt.seed = 300;
    opt.conversations = 24;
    opt.long_tail = true;
    Dataset ds = synth_generate(opt);

    const int batch = 4;
    auto rows = analyze_memory(ds, {1000000}, batch);
    REQUIRE(rows.size() == 1);

    // closed form: 1 - sum(true lengths) / (rows x padded length), per batch
    std::size_t total_true = 0, total_slots = 0;
    for (std::size_t start = 0; start < ds.conversations.size(); start += batch) {
        const std::size_t end = std::min(ds.conversations.size(), start + batch);
        std::size_t max_seq = 1, rows_count = 0, true_count = 0;
        for (std::size_t c = start; c < end; ++c) {
            for (const auto& u : ds.conversations[c].utterances) {
                max_seq = std::max(max_seq, u.tokens.size());
                rows_count += 1;
                true_count += u.tokens.size();
            }
        }
        total_true += true_count;
        total_slots += rows_count * max_seq;
    }
    const double expect = 1.0 - double(total_true) / double(total_slots);
    CHECK(rows[0].segment_waste == doctest::Approx(expect).epsilon(1e-12));
    CHECK(rows[0].utterance_waste == 0.0);
    // utterance recurrence always retains at least as much real context
    CHECK(rows[0].utterance_context >= rows[0].segment_context);
}

TEST_CASE("ablated allocations keep the head budget") {
    HeadAllocation base{2, 2, 4, 4};
    CHECK(ablated_allocation(base, "speaker").global == 6);
    CHECK(ablated_allocation(base, "speaker").speaker == 0);
    CHECK(ablated_allocation(base, "speaker&listener").global == 10);
    CHECK(ablated_allocation(base, "local").global == 4);
    CHECK(ablated_allocation(base, "global").local == 4);
    CHECK(ablated_allocation(base, "control").total() == 12);
    CHECK_THROWS_AS(ablated_allocation(base, "everything"), ConfigError);
    HeadAllocation only_global{12, 0, 0, 0};
    CHECK_THROWS_AS(ablated_allocation(only_global, "global"), ConfigError);
}

TEST_CASE("ablation report lists control plus one row per removal") {
    SynthOptions opt;
    opt.seed = 40;
    opt.conversations = 16;
    opt.mix_local = 0.6;
    opt.mix_intra = 0.4;
    opt.mix_inter = 0.0;
    Dataset train = synth_generate(opt);
    opt.seed = 41;
    opt.conversations = 8;
    Dataset val = synth_generate(opt);

    TrainConfig cfg = tiny_train_config();
    cfg.epochs = 1;
    cfg.patience = 0;
    auto rows = ablate(train, val, cfg, {"speaker"}, 1, 1);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].variant == "control");
    CHECK(rows[0].delta_vs_control == doctest::Approx(0.0));
    CHECK(rows[1].variant == "speaker");

    const std::string csv = ablation_csv(rows);
    CHECK(csv.find("variant,mean_metric,delta_vs_control,runs") == 0);
}

TEST_CASE("mask dump round-trips and matches the oracle") {
    SynthOptions opt;
    opt.seed = 50;
    opt.conversations = 3;
    opt.utterances_min = 4;
    opt.utterances_max = 6;
    Dataset ds = synth_generate(opt);
    const std::string path = "/tmp/dialogxl_test_maskdump.json";
    const std::string cid = ds.conversations[1].conversation_id;
    const int t = 4;  // 1-based
    dump_masks(ds, cid, t, 2, path);

    AttentionMaskSet from_file = read_mask_dump(path);
    std::vector<UtteranceSketch> prefix;
    for (int k = 0; k < t; ++k) {
        const auto& u = ds.conversations[1].utterances[static_cast<std::size_t>(k)];
        prefix.push_back({u.tokens.size(), u.speaker_id});
    }
    AttentionMaskSet expect = mask_oracle(prefix, t - 1, 2);
    CHECK(from_file.global == expect.global);
    CHECK(from_file.local == expect.local);
    CHECK(from_file.speaker == expect.speaker);
    CHECK(from_file.listener == expect.listener);
    std::remove(path.c_str());
}

TEST_CASE("mask dump at t=1 has four identical matrices") {
    SynthOptions opt;
    opt.seed = 51;
    opt.conversations = 1;
    Dataset ds = synth_generate(opt);
    const std::string path = "/tmp/dialogxl_test_maskdump_t1.json";
    dump_masks(ds, ds.conversations[0].conversation_id, 1, 2, path);
    AttentionMaskSet s = read_mask_dump(path);
    CHECK(s.global == s.local);
    CHECK(s.global == s.speaker);
    CHECK(s.global == s.listener);
    CHECK(s.global.masked_count() == 0);
    std::remove(path.c_str());
}

TEST_CASE("mask dump rejects t out of range") {
    SynthOptions opt;
    opt.seed = 52;
    opt.conversations = 1;
    opt.utterances_min = 2;
    opt.utterances_max = 2;
    Dataset ds = synth_generate(opt);
    CHECK_THROWS_AS(dump_masks(ds, ds.conversations[0].conversation_id, 3, 2, "/tmp/x.json"),
                    DataError);
    CHECK_THROWS_AS(dump_masks(ds, "nope", 1, 2, "/tmp/x.json"), DataError);
}

TEST_CASE("train config file parsing") {
    const std::string path = "/tmp/dialogxl_test_traincfg.json";
    {
        std::ofstream os(path);
        os << R"({"train":"t.json","val":"v.json","epochs":3,"batch_size":4,"lr":0.001,
                 "seed":9,"metric":"micro_f1","exclude_label":"neutral",
                 "d_model":24,"n_layers":2,"n_heads":4,"head_allocation":"1,1,1,1",
                 "window":2,"max_memory":150,"dropout":0.1})";
    }
    TrainConfig cfg = train_config_from_file(path);
    CHECK(cfg.train_path == "t.json");
    CHECK(cfg.epochs == 3);
    CHECK(cfg.metric == MetricKind::micro_f1);
    CHECK(cfg.exclude_label == "neutral");
    CHECK(cfg.model.d_model == 24);
    CHECK(cfg.model.heads.global == 1);
    CHECK(cfg.model.max_memory == 150);
    CHECK(cfg.model.dropout == doctest::Approx(0.1));
    std::remove(path.c_str());

    {
        std::ofstream os(path);
        os << R"({"train":"t.json","bogus_key":1})";
    }
    CHECK_THROWS_AS(train_config_from_file(path), ConfigError);
    std::remove(path.c_str());
}
