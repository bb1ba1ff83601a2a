#pragma once

#include <cstdint>
#include <vector>

#include "dialogxl/rng.hpp"
#include "dialogxl/tape.hpp"
#include "dialogxl/tensor.hpp"

namespace dialogxl {

// Additive mask fill. A finite large-negative constant instead of -inf so
// masked logits survive the softmax exponent without producing NaNs; the
// resulting weight is below 1e-12.
inline constexpr double kMaskFill = -1e9;

// All operations are recorded on the thread's active Tape when at least one
// input requires grad. Without an active tape they are pure functions.

Tensor matmul(Tensor a, Tensor b);   // [m×k]·[k×n] -> [m×n]
Tensor transpose(Tensor a);                 // [m×n] -> [n×m]

Tensor add(Tensor a, Tensor b);      // same shape
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);      // elementwise
Tensor scale(Tensor a, double c);
Tensor add_rowvec(Tensor x, Tensor v);  // [n×d] + [d] broadcast

Tensor relu(Tensor x);
Tensor gelu(Tensor x);                      // tanh approximation
Tensor log(Tensor x);

// Row-stabilized softmax over the last dimension. Rows whose every entry is
// at or below the mask fill throw NumericError (degenerate row): the mask
// builders guarantee at least one visible key per query, so hitting this
// means an upstream bug.
Tensor softmax_rows(Tensor x);

// Per-row zero mean / unit variance over the last dimension (population
// variance, eps-stabilized), then elementwise affine by gain and bias [d].
Tensor layer_norm(Tensor x, Tensor gain, Tensor bias);

Tensor concat_rows(Tensor a, Tensor b);         // [m1×d],[m2×d] -> [(m1+m2)×d]
Tensor concat_cols(const std::vector<Tensor>& parts);         // [n×d_i] -> [n×Σd_i]
Tensor slice_rows(Tensor x, std::size_t start, std::size_t len);

// out row i = table row ids[i]; backward scatter-adds into the table.
Tensor gather_rows(Tensor table, const std::vector<int>& ids);

// out[i][j] = x[i][idx[i][j]]; backward scatter-adds. idx is row-major with
// the output's column count.
Tensor gather_cols_per_row(Tensor x, const std::vector<std::vector<std::size_t>>& idx);

// scores + kMaskFill at masked entries (row-major flags, 1 = masked).
// The mask is a constant: gradient passes through untouched everywhere.
Tensor apply_additive_mask(Tensor scores, const std::vector<std::uint8_t>& masked);

Tensor pick(Tensor x, std::size_t i, std::size_t j);   // scalar [1]
Tensor sum(Tensor x);                                  // scalar [1]

// Inverted dropout: train-time scaling by 1/(1-p), identity at eval.
Tensor dropout(Tensor x, double p, Rng& rng, bool training);

}  // namespace dialogxl
