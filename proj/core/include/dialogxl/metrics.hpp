#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dialogxl/data.hpp"

namespace dialogxl {

struct EvalReport {
    std::vector<std::string> label_names;
    std::vector<std::size_t> support;   // gold counts per label
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    double weighted_f1 = 0.0;           // support-weighted mean of per-label F1
    double micro_f1 = 0.0;              // pooled counts, excluded label left out
    std::optional<int> excluded_label;
    std::vector<std::vector<std::size_t>> confusion;  // [gold][pred]
    double accuracy = 0.0;

    // per-rule accuracy on synthetic data: correct/total per rule
    std::size_t rule_correct[3] = {0, 0, 0};  // local, intra, inter
    std::size_t rule_total[3] = {0, 0, 0};
    double rule_accuracy(LabelRule r) const;

    std::string to_csv() const;
    std::string confusion_csv() const;
};

// gold/pred/rules are parallel; rules may be LabelRule::none for real data.
EvalReport compute_eval_report(const std::vector<int>& gold, const std::vector<int>& pred,
                               const std::vector<LabelRule>& rules, const LabelSet& labels,
                               std::optional<int> excluded_label = std::nullopt);

enum class MetricKind : std::uint8_t { weighted_f1, micro_f1, accuracy };

MetricKind metric_from_name(const std::string& name);
const char* metric_name(MetricKind kind);
double metric_value(const EvalReport& report, MetricKind kind);

}  // namespace dialogxl
