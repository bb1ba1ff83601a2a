#include "dialogxl/optim.hpp"

#include <cmath>

#include "dialogxl/errors.hpp"

namespace dialogxl {

AdamW::AdamW(std::vector<std::pair<std::string, Tensor>> params, AdamWConfig cfg) : cfg_(cfg) {
    slots_.reserve(params.size());
    for (auto& [name, p] : params) {
        Slot s;
        s.name = std::move(name);
        s.param = p;
        s.m.assign(p.numel(), 0.0);
        s.v.assign(p.numel(), 0.0);
        slots_.push_back(std::move(s));
    }
}

void AdamW::step() {
    t_ += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Slot& s : slots_) {
        auto pv = s.param.data_mut();
        const bool has_grad = s.param.has_grad();
        const auto gv = has_grad ? s.param.grad() : std::span<const double>{};
        const bool quantize = s.param.dtype() == DType::f32;
        for (std::size_t i = 0; i < pv.size(); ++i) {
            const double g = has_grad ? gv[i] : 0.0;
            if (!std::isfinite(g)) {
                throw NumericError("adamw: nonfinite gradient in parameter '" + s.name + "'");
            }
            s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g;
            s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g * g;
            const double m_hat = s.m[i] / bc1;
            const double v_hat = s.v[i] / bc2;
            const double p0 = pv[i];
            pv[i] = p0 - cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps) -
                    cfg_.lr * cfg_.weight_decay * p0;
            if (quantize) pv[i] = static_cast<double>(static_cast<float>(pv[i]));
        }
    }
}

void AdamW::zero_grad() {
    for (Slot& s : slots_) s.param.zero_grad();
}

}  // namespace dialogxl
