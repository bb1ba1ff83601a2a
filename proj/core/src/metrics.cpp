#include "dialogxl/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "dialogxl/errors.hpp"

namespace dialogxl {

double EvalReport::rule_accuracy(LabelRule r) const {
    const int idx = r == LabelRule::local ? 0 : r == LabelRule::intra ? 1 : 2;
    if (rule_total[idx] == 0) return 0.0;
    return static_cast<double>(rule_correct[idx]) / static_cast<double>(rule_total[idx]);
}

EvalReport compute_eval_report(const std::vector<int>& gold, const std::vector<int>& pred,
                               const std::vector<LabelRule>& rules, const LabelSet& labels,
                               std::optional<int> excluded_label) {
    if (gold.size() != pred.size() || (!rules.empty() && rules.size() != gold.size())) {
        throw DimensionError("eval report: gold/pred/rule length mismatch");
    }
    const std::size_t n_labels = labels.size();
    EvalReport r;
    r.label_names = labels.names();
    r.excluded_label = excluded_label;
    r.support.assign(n_labels, 0);
    r.confusion.assign(n_labels, std::vector<std::size_t>(n_labels, 0));

    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] < 0 || static_cast<std::size_t>(gold[i]) >= n_labels || pred[i] < 0 ||
            static_cast<std::size_t>(pred[i]) >= n_labels) {
            throw DataError("eval report: label id out of range at index " + std::to_string(i));
        }
        r.confusion[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(pred[i])] += 1;
        r.support[static_cast<std::size_t>(gold[i])] += 1;
        const bool hit = gold[i] == pred[i];
        if (hit) correct += 1;
        if (!rules.empty() && rules[i] != LabelRule::none) {
            const int idx = rules[i] == LabelRule::local ? 0 : rules[i] == LabelRule::intra ? 1 : 2;
            r.rule_total[idx] += 1;
            if (hit) r.rule_correct[idx] += 1;
        }
    }
    r.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());

    std::size_t micro_tp = 0, micro_fp = 0, micro_fn = 0;
    double weighted = 0.0;
    for (std::size_t l = 0; l < n_labels; ++l) {
        std::size_t tp = r.confusion[l][l];
        std::size_t fp = 0, fn = 0;
        for (std::size_t k = 0; k < n_labels; ++k) {
            if (k == l) continue;
            fp += r.confusion[k][l];
            fn += r.confusion[l][k];
        }
        const double p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double rec = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        const double f1 = p + rec == 0.0 ? 0.0 : 2.0 * p * rec / (p + rec);
        r.precision.push_back(p);
        r.recall.push_back(rec);
        r.f1.push_back(f1);
        weighted += static_cast<double>(r.support[l]) * f1;
        if (!excluded_label.has_value() || static_cast<std::size_t>(*excluded_label) != l) {
            micro_tp += tp;
            micro_fp += fp;
            micro_fn += fn;
        }
    }
    r.weighted_f1 = gold.empty() ? 0.0 : weighted / static_cast<double>(gold.size());
    const double denom = static_cast<double>(2 * micro_tp + micro_fp + micro_fn);
    r.micro_f1 = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(micro_tp) / denom;
    return r;
}

namespace {
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}
}  // namespace

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << "label,support,precision,recall,f1\n";
    for (std::size_t l = 0; l < label_names.size(); ++l) {
        os << label_names[l] << "," << support[l] << "," << fmt(precision[l]) << ","
           << fmt(recall[l]) << "," << fmt(f1[l]) << "\n";
    }
    os << "weighted_f1,," << fmt(weighted_f1) << ",,\n";
    os << "micro_f1";
    if (excluded_label.has_value())
        os << "_excluding_" << label_names[static_cast<std::size_t>(*excluded_label)];
    os << ",," << fmt(micro_f1) << ",,\n";
    os << "accuracy,," << fmt(accuracy) << ",,\n";
    static const char* rule_names[3] = {"local", "intra", "inter"};
    static const LabelRule rule_ids[3] = {LabelRule::local, LabelRule::intra, LabelRule::inter};
    for (int i = 0; i < 3; ++i) {
        if (rule_total[i] > 0) {
            os << "rule_" << rule_names[i] << "_accuracy," << rule_total[i] << ","
               << fmt(rule_accuracy(rule_ids[i])) << ",,\n";
        }
    }
    return os.str();
}

std::string EvalReport::confusion_csv() const {
    std::ostringstream os;
    os << "gold\\pred";
    for (const auto& n : label_names) os << "," << n;
    os << "\n";
    for (std::size_t g = 0; g < confusion.size(); ++g) {
        os << label_names[g];
        for (std::size_t p = 0; p < confusion[g].size(); ++p) os << "," << confusion[g][p];
        os << "\n";
    }
    return os.str();
}

MetricKind metric_from_name(const std::string& name) {
    if (name == "weighted_f1") return MetricKind::weighted_f1;
    if (name == "micro_f1") return MetricKind::micro_f1;
    if (name == "accuracy") return MetricKind::accuracy;
    throw ConfigError("unknown metric '" + name + "' (weighted_f1|micro_f1|accuracy)");
}

const char* metric_name(MetricKind kind) {
    switch (kind) {
        case MetricKind::weighted_f1: return "weighted_f1";
        case MetricKind::micro_f1: return "micro_f1";
        case MetricKind::accuracy: return "accuracy";
    }
    return "?";
}

double metric_value(const EvalReport& report, MetricKind kind) {
    switch (kind) {
        case MetricKind::weighted_f1: return report.weighted_f1;
        case MetricKind::micro_f1: return report.micro_f1;
        case MetricKind::accuracy: return report.accuracy;
    }
    return 0.0;
}

}  // namespace dialogxl
