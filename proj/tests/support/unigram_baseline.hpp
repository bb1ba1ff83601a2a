#pragma once

// Test-only oracle: multinomial logistic regression on a bag-of-words of the
// current utterance. Deliberately independent of the tensor/autograd stack;
// plain arrays and hand-written gradients. Used to certify that synthetic
// label rules are (or are not) solvable from the current utterance alone.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dialogxl/data.hpp"

namespace testsupport {

class UnigramBaseline {
  public:
    void fit(const dialogxl::Dataset& train, int epochs = 30, double lr = 0.5) {
        vocab_ = train.vocab.size();
        labels_ = train.labels.size();
        w_.assign(vocab_ * labels_, 0.0);
        b_.assign(labels_, 0.0);
        for (int e = 0; e < epochs; ++e) {
            for (const auto& conv : train.conversations) {
                for (const auto& u : conv.utterances) {
                    if (!u.label.has_value()) continue;
                    step(u, *u.label, lr);
                }
            }
        }
    }

    int predict(const dialogxl::Utterance& u) const {
        std::vector<double> z = logits(u);
        return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    }

    // accuracy over utterances whose rule matches `rule` (or all when none)
    double accuracy(const dialogxl::Dataset& eval,
                    dialogxl::LabelRule rule = dialogxl::LabelRule::none) const {
        std::size_t total = 0, correct = 0;
        for (const auto& conv : eval.conversations) {
            for (const auto& u : conv.utterances) {
                if (!u.label.has_value()) continue;
                if (rule != dialogxl::LabelRule::none && u.rule != rule) continue;
                total += 1;
                if (predict(u) == *u.label) correct += 1;
            }
        }
        return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
    }

  private:
    std::vector<double> logits(const dialogxl::Utterance& u) const {
        std::vector<double> z(b_);
        for (int tok : u.tokens) {
            if (tok < 0 || static_cast<std::size_t>(tok) >= vocab_) continue;
            for (std::size_t l = 0; l < labels_; ++l)
                z[l] += w_[static_cast<std::size_t>(tok) * labels_ + l];
        }
        return z;
    }

    void step(const dialogxl::Utterance& u, int gold, double lr) {
        std::vector<double> z = logits(u);
        const double mx = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (double& v : z) {
            v = std::exp(v - mx);
            denom += v;
        }
        for (std::size_t l = 0; l < labels_; ++l) {
            const double p = z[l] / denom;
            const double g = p - (static_cast<int>(l) == gold ? 1.0 : 0.0);
            b_[l] -= lr * g;
            for (int tok : u.tokens)
                w_[static_cast<std::size_t>(tok) * labels_ + l] -= lr * g;
        }
    }

    std::size_t vocab_ = 0;
    std::size_t labels_ = 0;
    std::vector<double> w_;
    std::vector<double> b_;
};

}  // namespace testsupport
