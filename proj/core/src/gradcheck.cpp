#include "dialogxl/gradcheck.hpp"

#include <cmath>

#include "dialogxl/errors.hpp"
#include "dialogxl/tape.hpp"

namespace dialogxl {

double grad_check(const std::function<Tensor()>& f, Tensor x, double eps) {
    // analytic pass
    x.zero_grad();
    std::vector<double> analytic;
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = f();
        backward(tape, loss);
        if (!x.has_grad()) {
            analytic.assign(x.numel(), 0.0);
        } else {
            analytic.assign(x.grad().begin(), x.grad().end());
        }
    }
    x.zero_grad();

    // central differences, no tape active
    auto xv = x.data_mut();
    double worst = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double orig = xv[i];
        xv[i] = orig + eps;
        const double fp = f().item();
        xv[i] = orig - eps;
        const double fm = f().item();
        xv[i] = orig;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace dialogxl
