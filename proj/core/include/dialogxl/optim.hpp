#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dialogxl/tensor.hpp"

namespace dialogxl {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// AdamW with decoupled weight decay: the decay term is applied directly to
// the parameters, not mixed into the gradient moments. First/second moments
// start at zero; the step counter increases by one per step() and drives
// bias correction.
class AdamW {
  public:
    AdamW(std::vector<std::pair<std::string, Tensor>> params, AdamWConfig cfg);

    // Missing gradients count as zero. Nonfinite gradients throw
    // NumericError carrying the parameter name.
    void step();
    void zero_grad();

    std::size_t step_count() const { return t_; }

  private:
    struct Slot {
        std::string name;
        Tensor param;
        std::vector<double> m;
        std::vector<double> v;
    };
    std::vector<Slot> slots_;
    AdamWConfig cfg_;
    std::size_t t_ = 0;
};

}  // namespace dialogxl
