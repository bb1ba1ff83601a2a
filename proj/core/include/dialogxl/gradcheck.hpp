#pragma once

#include <functional>

#include "dialogxl/tensor.hpp"

namespace dialogxl {

// Central finite-difference check of reverse-mode gradients.
//
// f must be a deterministic scalar-valued function that re-reads x's current
// values on every call (same tensor identity, perturbed in place). Returns
// the max over coordinates of |analytic - numeric| / max(1, |analytic|).
double grad_check(const std::function<Tensor()>& f, Tensor x, double eps = 1e-5);

}  // namespace dialogxl
