#include "dialogxl/ops.hpp"

#include <cmath>
#include <initializer_list>

#include "dialogxl/errors.hpp"

namespace dialogxl {

namespace {

constexpr double kLnEps = 1e-5;

bool want_grad(std::initializer_list<const Tensor*> inputs) {
    if (Tape::current() == nullptr) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

DType promote(std::initializer_list<const Tensor*> inputs) {
    for (const Tensor* t : inputs) {
        if (t->dtype() == DType::f64) return DType::f64;
    }
    return DType::f32;
}

void check_same_shape(Tensor a, Tensor b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

std::size_t last_dim(Tensor x) {
    if (x.ndim() == 0) throw DimensionError("op on empty tensor");
    return x.shape().back();
}

}  // namespace

Tensor matmul(Tensor a, Tensor b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows()) {
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n, 0.0);
    const auto av = a.data();
    const auto bv = b.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = &bv[p * n];
            double* orow = &out[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    const bool rec = want_grad({&a, &b});
    Tensor c = Tensor::from_data({m, n}, std::move(out), rec, promote({&a, &b}));
    if (rec) {
        Tape::current()->record("matmul", {a.id(), b.id()}, c, [a, b, c, m, k, n]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            if (a.requires_grad()) {
                // dA = dC · Bᵀ
                std::vector<double> da(m * k, 0.0);
                const auto bv = b.data();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < n; ++j) {
                        const double gij = g[i * n + j];
                        if (gij == 0.0) continue;
                        for (std::size_t p = 0; p < k; ++p) da[i * k + p] += gij * bv[p * n + j];
                    }
                }
                a.accumulate_grad(da);
            }
            if (b.requires_grad()) {
                // dB = Aᵀ · dC
                std::vector<double> db(k * n, 0.0);
                const auto av = a.data();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = av[i * k + p];
                        if (aip == 0.0) continue;
                        for (std::size_t j = 0; j < n; ++j) db[p * n + j] += aip * g[i * n + j];
                    }
                }
                b.accumulate_grad(db);
            }
        });
    }
    return c;
}

Tensor transpose(Tensor a) {
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(m * n);
    const auto av = a.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
    const bool rec = want_grad({&a});
    Tensor c = Tensor::from_data({n, m}, std::move(out), rec, a.dtype());
    if (rec) {
        Tape::current()->record("transpose", {a.id()}, c, [a, c, m, n]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            std::vector<double> da(m * n);
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t i = 0; i < m; ++i) da[i * n + j] = g[j * m + i];
            a.accumulate_grad(da);
        });
    }
    return c;
}

Tensor add(Tensor a, Tensor b) {
    check_same_shape(a, b, "add");
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    const auto av = a.data(), bv = b.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i];
    const bool rec = want_grad({&a, &b});
    Tensor c = Tensor::from_data(a.shape(), std::move(out), rec, promote({&a, &b}));
    if (rec) {
        Tape::current()->record("add", {a.id(), b.id()}, c, [a, b, c]() mutable {
            if (!c.has_grad()) return;
            if (a.requires_grad()) a.accumulate_grad(c.grad());
            if (b.requires_grad()) b.accumulate_grad(c.grad());
        });
    }
    return c;
}

Tensor sub(Tensor a, Tensor b) {
    check_same_shape(a, b, "sub");
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    const auto av = a.data(), bv = b.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bv[i];
    const bool rec = want_grad({&a, &b});
    Tensor c = Tensor::from_data(a.shape(), std::move(out), rec, promote({&a, &b}));
    if (rec) {
        Tape::current()->record("sub", {a.id(), b.id()}, c, [a, b, c]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            if (a.requires_grad()) a.accumulate_grad(g);
            if (b.requires_grad()) {
                std::vector<double> db(g.size());
                for (std::size_t i = 0; i < g.size(); ++i) db[i] = -g[i];
                b.accumulate_grad(db);
            }
        });
    }
    return c;
}

Tensor mul(Tensor a, Tensor b) {
    check_same_shape(a, b, "mul");
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    const auto av = a.data(), bv = b.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i];
    const bool rec = want_grad({&a, &b});
    Tensor c = Tensor::from_data(a.shape(), std::move(out), rec, promote({&a, &b}));
    if (rec) {
        Tape::current()->record("mul", {a.id(), b.id()}, c, [a, b, c]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            if (a.requires_grad()) {
                std::vector<double> da(g.size());
                const auto bv2 = b.data();
                for (std::size_t i = 0; i < g.size(); ++i) da[i] = g[i] * bv2[i];
                a.accumulate_grad(da);
            }
            if (b.requires_grad()) {
                std::vector<double> db(g.size());
                const auto av2 = a.data();
                for (std::size_t i = 0; i < g.size(); ++i) db[i] = g[i] * av2[i];
                b.accumulate_grad(db);
            }
        });
    }
    return c;
}

Tensor scale(Tensor a, double cfac) {
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    const auto av = a.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * cfac;
    const bool rec = want_grad({&a});
    Tensor c = Tensor::from_data(a.shape(), std::move(out), rec, a.dtype());
    if (rec) {
        Tape::current()->record("scale", {a.id()}, c, [a, c, cfac]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            std::vector<double> da(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) da[i] = g[i] * cfac;
            a.accumulate_grad(da);
        });
    }
    return c;
}

Tensor add_rowvec(Tensor x, Tensor v) {
    if (x.ndim() != 2 || v.ndim() != 1 || v.shape()[0] != x.cols()) {
        throw DimensionError("add_rowvec: " + shape_str(x.shape()) + " + " + shape_str(v.shape()));
    }
    const std::size_t m = x.rows(), d = x.cols();
    std::vector<double> out(m * d);
    const auto xv = x.data(), vv = v.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xv[i * d + j] + vv[j];
    const bool rec = want_grad({&x, &v});
    Tensor c = Tensor::from_data({m, d}, std::move(out), rec, promote({&x, &v}));
    if (rec) {
        Tape::current()->record("add_rowvec", {x.id(), v.id()}, c, [x, v, c, m, d]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            if (x.requires_grad()) x.accumulate_grad(g);
            if (v.requires_grad()) {
                std::vector<double> dv(d, 0.0);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < d; ++j) dv[j] += g[i * d + j];
                v.accumulate_grad(dv);
            }
        });
    }
    return c;
}

Tensor relu(Tensor x) {
    const std::size_t n = x.numel();
    std::vector<double> out(n);
    const auto xv = x.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    const bool rec = want_grad({&x});
    Tensor c = Tensor::from_data(x.shape(), std::move(out), rec, x.dtype());
    if (rec) {
        Tape::current()->record("relu", {x.id()}, c, [x, c]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            const auto xv2 = x.data();
            std::vector<double> dx(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) dx[i] = xv2[i] > 0.0 ? g[i] : 0.0;
            x.accumulate_grad(dx);
        });
    }
    return c;
}

Tensor gelu(Tensor x) {
    constexpr double c0 = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double c1 = 0.044715;
    const std::size_t n = x.numel();
    std::vector<double> out(n);
    const auto xv = x.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = xv[i];
        out[i] = 0.5 * v * (1.0 + std::tanh(c0 * (v + c1 * v * v * v)));
    }
    const bool rec = want_grad({&x});
    Tensor c = Tensor::from_data(x.shape(), std::move(out), rec, x.dtype());
    if (rec) {
        Tape::current()->record("gelu", {x.id()}, c, [x, c]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            const auto xv2 = x.data();
            std::vector<double> dx(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double v = xv2[i];
                const double u = c0 * (v + c1 * v * v * v);
                const double t = std::tanh(u);
                const double du = c0 * (1.0 + 3.0 * c1 * v * v);
                dx[i] = g[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
            }
            x.accumulate_grad(dx);
        });
    }
    return c;
}

Tensor log(Tensor x) {
    const std::size_t n = x.numel();
    std::vector<double> out(n);
    const auto xv = x.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = std::log(xv[i]);
    const bool rec = want_grad({&x});
    Tensor c = Tensor::from_data(x.shape(), std::move(out), rec, x.dtype());
    if (rec) {
        Tape::current()->record("log", {x.id()}, c, [x, c]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            const auto xv2 = x.data();
            std::vector<double> dx(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] / xv2[i];
            x.accumulate_grad(dx);
        });
    }
    return c;
}

Tensor softmax_rows(Tensor x) {
    const std::size_t d = last_dim(x);
    if (d < 1) throw DimensionError("softmax_rows: empty last dimension");
    const std::size_t rows = x.numel() / d;
    std::vector<double> out(x.numel());
    const auto xv = x.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = &xv[r * d];
        double mx = row[0];
        for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
        if (mx <= kMaskFill / 2.0) {
            throw NumericError("softmax_rows: fully masked row " + std::to_string(r));
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            out[r * d + j] = std::exp(row[j] - mx);
            denom += out[r * d + j];
        }
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] /= denom;
    }
    const bool rec = want_grad({&x});
    Tensor c = Tensor::from_data(x.shape(), std::move(out), rec, x.dtype());
    if (rec) {
        Tape::current()->record("softmax_rows", {x.id()}, c, [x, c, rows, d]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            const auto yv = c.data();
            std::vector<double> dx(g.size());
            for (std::size_t r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) dot += g[r * d + j] * yv[r * d + j];
                for (std::size_t j = 0; j < d; ++j)
                    dx[r * d + j] = yv[r * d + j] * (g[r * d + j] - dot);
            }
            x.accumulate_grad(dx);
        });
    }
    return c;
}

Tensor layer_norm(Tensor x, Tensor gain, Tensor bias) {
    const std::size_t d = last_dim(x);
    if (gain.numel() != d || bias.numel() != d) {
        throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                             shape_str(bias.shape()) + " vs feature dim " + std::to_string(d));
    }
    const std::size_t rows = x.numel() / d;
    std::vector<double> out(x.numel());
    std::vector<double> inv_std(rows);
    std::vector<double> xhat(x.numel());
    const auto xv = x.data();
    const auto gv = gain.data(), bv = bias.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = &xv[r * d];
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + kLnEps);
        inv_std[r] = is;
        for (std::size_t j = 0; j < d; ++j) {
            xhat[r * d + j] = (row[j] - mean) * is;
            out[r * d + j] = xhat[r * d + j] * gv[j] + bv[j];
        }
    }
    const bool rec = want_grad({&x, &gain, &bias});
    Tensor c = Tensor::from_data(x.shape(), std::move(out), rec, promote({&x, &gain, &bias}));
    if (rec) {
        auto saved_xhat = std::make_shared<std::vector<double>>(std::move(xhat));
        auto saved_is = std::make_shared<std::vector<double>>(std::move(inv_std));
        Tape::current()->record(
            "layer_norm", {x.id(), gain.id(), bias.id()}, c,
            [x, gain, bias, c, saved_xhat, saved_is, rows, d]() mutable {
                if (!c.has_grad()) return;
                const auto g = c.grad();
                const auto& xh = *saved_xhat;
                const auto& is = *saved_is;
                const auto gv2 = gain.data();
                if (x.requires_grad()) {
                    std::vector<double> dx(g.size());
                    for (std::size_t r = 0; r < rows; ++r) {
                        double mean_gy = 0.0, mean_gyx = 0.0;
                        for (std::size_t j = 0; j < d; ++j) {
                            const double gy = g[r * d + j] * gv2[j];
                            mean_gy += gy;
                            mean_gyx += gy * xh[r * d + j];
                        }
                        mean_gy /= static_cast<double>(d);
                        mean_gyx /= static_cast<double>(d);
                        for (std::size_t j = 0; j < d; ++j) {
                            const double gy = g[r * d + j] * gv2[j];
                            dx[r * d + j] = (gy - mean_gy - xh[r * d + j] * mean_gyx) * is[r];
                        }
                    }
                    x.accumulate_grad(dx);
                }
                if (gain.requires_grad()) {
                    std::vector<double> dg(d, 0.0);
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < d; ++j) dg[j] += g[r * d + j] * xh[r * d + j];
                    gain.accumulate_grad(dg);
                }
                if (bias.requires_grad()) {
                    std::vector<double> db(d, 0.0);
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < d; ++j) db[j] += g[r * d + j];
                    bias.accumulate_grad(db);
                }
            });
    }
    return c;
}

Tensor concat_rows(Tensor a, Tensor b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.cols()) {
        throw DimensionError("concat_rows: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    if (a.rows() == 0) return b;
    if (b.rows() == 0) return a;
    const std::size_t d = a.cols(), ma = a.rows(), mb = b.rows();
    std::vector<double> out;
    out.reserve((ma + mb) * d);
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    const bool rec = want_grad({&a, &b});
    Tensor c = Tensor::from_data({ma + mb, d}, std::move(out), rec, promote({&a, &b}));
    if (rec) {
        Tape::current()->record("concat_rows", {a.id(), b.id()}, c, [a, b, c, ma, mb, d]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            if (a.requires_grad()) a.accumulate_grad(g.subspan(0, ma * d));
            if (b.requires_grad()) b.accumulate_grad(g.subspan(ma * d, mb * d));
        });
    }
    return c;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no parts");
    const std::size_t m = parts[0].rows();
    std::size_t total = 0;
    for (Tensor p : parts) {
        if (p.rows() != m) {
            throw DimensionError("concat_cols: row mismatch " + shape_str(p.shape()));
        }
        total += p.cols();
    }
    std::vector<double> out(m * total);
    std::size_t off = 0;
    for (Tensor p : parts) {
        const auto pv = p.data();
        const std::size_t pc = p.cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < pc; ++j) out[i * total + off + j] = pv[i * pc + j];
        off += pc;
    }
    bool rec = false;
    if (Tape::current() != nullptr) {
        for (Tensor p : parts)
            if (p.requires_grad()) rec = true;
    }
    DType dt = DType::f32;
    for (Tensor p : parts)
        if (p.dtype() == DType::f64) dt = DType::f64;
    Tensor c = Tensor::from_data({m, total}, std::move(out), rec, dt);
    if (rec) {
        std::vector<std::uint64_t> ids;
        for (Tensor p : parts) ids.push_back(p.id());
        std::vector<Tensor> saved = parts;
        Tape::current()->record("concat_cols", std::move(ids), c, [saved, c, m, total]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            std::size_t off2 = 0;
            for (Tensor& p : saved) {
                const std::size_t pc = p.cols();
                if (p.requires_grad()) {
                    std::vector<double> dp(m * pc);
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < pc; ++j) dp[i * pc + j] = g[i * total + off2 + j];
                    p.accumulate_grad(dp);
                }
                off2 += pc;
            }
        });
    }
    return c;
}

Tensor slice_rows(Tensor x, std::size_t start, std::size_t len) {
    if (x.ndim() != 2 || start + len > x.rows()) {
        throw DimensionError("slice_rows: [" + std::to_string(start) + "," +
                             std::to_string(start + len) + ") of " + shape_str(x.shape()));
    }
    const std::size_t d = x.cols();
    std::vector<double> out(x.data().begin() + start * d, x.data().begin() + (start + len) * d);
    const bool rec = want_grad({&x});
    Tensor c = Tensor::from_data({len, d}, std::move(out), rec, x.dtype());
    if (rec) {
        Tape::current()->record("slice_rows", {x.id()}, c, [x, c, start, len, d]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            std::vector<double> dx(x.numel(), 0.0);
            for (std::size_t i = 0; i < len * d; ++i) dx[start * d + i] = g[i];
            x.accumulate_grad(dx);
        });
    }
    return c;
}

Tensor gather_rows(Tensor table, const std::vector<int>& ids) {
    const std::size_t d = table.cols();
    std::vector<double> out(ids.size() * d);
    const auto tv = table.data();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table.rows()) {
            throw DimensionError("gather_rows: id " + std::to_string(ids[i]) + " out of range [0," +
                                 std::to_string(table.rows()) + ")");
        }
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = tv[static_cast<std::size_t>(ids[i]) * d + j];
    }
    const bool rec = want_grad({&table});
    Tensor c = Tensor::from_data({ids.size(), d}, std::move(out), rec, table.dtype());
    if (rec) {
        Tape::current()->record("gather_rows", {table.id()}, c, [table, c, ids, d]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            std::vector<double> dt(table.numel(), 0.0);
            for (std::size_t i = 0; i < ids.size(); ++i)
                for (std::size_t j = 0; j < d; ++j)
                    dt[static_cast<std::size_t>(ids[i]) * d + j] += g[i * d + j];
            table.accumulate_grad(dt);
        });
    }
    return c;
}

Tensor gather_cols_per_row(Tensor x, const std::vector<std::vector<std::size_t>>& idx) {
    if (x.ndim() != 2 || idx.size() != x.rows()) {
        throw DimensionError("gather_cols_per_row: index rows " + std::to_string(idx.size()) +
                             " vs tensor " + shape_str(x.shape()));
    }
    const std::size_t m = x.rows(), dx_cols = x.cols();
    const std::size_t n = idx.empty() ? 0 : idx[0].size();
    std::vector<double> out(m * n);
    const auto xv = x.data();
    for (std::size_t i = 0; i < m; ++i) {
        if (idx[i].size() != n) throw DimensionError("gather_cols_per_row: ragged index");
        for (std::size_t j = 0; j < n; ++j) {
            if (idx[i][j] >= dx_cols) {
                throw DimensionError("gather_cols_per_row: index " + std::to_string(idx[i][j]) +
                                     " out of range [0," + std::to_string(dx_cols) + ")");
            }
            out[i * n + j] = xv[i * dx_cols + idx[i][j]];
        }
    }
    const bool rec = want_grad({&x});
    Tensor c = Tensor::from_data({m, n}, std::move(out), rec, x.dtype());
    if (rec) {
        Tape::current()->record("gather_cols_per_row", {x.id()}, c,
                                [x, c, idx, m, n, dx_cols]() mutable {
                                    if (!c.has_grad()) return;
                                    const auto g = c.grad();
                                    std::vector<double> dx(m * dx_cols, 0.0);
                                    for (std::size_t i = 0; i < m; ++i)
                                        for (std::size_t j = 0; j < n; ++j)
                                            dx[i * dx_cols + idx[i][j]] += g[i * n + j];
                                    x.accumulate_grad(dx);
                                });
    }
    return c;
}

Tensor apply_additive_mask(Tensor scores, const std::vector<std::uint8_t>& masked) {
    if (masked.size() != scores.numel()) {
        throw DimensionError("apply_additive_mask: mask size " + std::to_string(masked.size()) +
                             " vs scores " + shape_str(scores.shape()));
    }
    const std::size_t n = scores.numel();
    std::vector<double> out(n);
    const auto sv = scores.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = masked[i] ? sv[i] + kMaskFill : sv[i];
    const bool rec = want_grad({&scores});
    Tensor c = Tensor::from_data(scores.shape(), std::move(out), rec, scores.dtype());
    if (rec) {
        Tape::current()->record("apply_additive_mask", {scores.id()}, c, [scores, c]() mutable {
            if (!c.has_grad()) return;
            scores.accumulate_grad(c.grad());
        });
    }
    return c;
}

Tensor pick(Tensor x, std::size_t i, std::size_t j) {
    const double v = x.at(i, j);
    const bool rec = want_grad({&x});
    Tensor c = Tensor::from_data({1}, {v}, rec, x.dtype());
    if (rec) {
        const std::size_t flat = i * x.cols() + j;
        Tape::current()->record("pick", {x.id()}, c, [x, c, flat]() mutable {
            if (!c.has_grad()) return;
            std::vector<double> dx(x.numel(), 0.0);
            dx[flat] = c.grad()[0];
            x.accumulate_grad(dx);
        });
    }
    return c;
}

Tensor sum(Tensor x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    const bool rec = want_grad({&x});
    Tensor c = Tensor::from_data({1}, {s}, rec, x.dtype());
    if (rec) {
        Tape::current()->record("sum", {x.id()}, c, [x, c]() mutable {
            if (!c.has_grad()) return;
            std::vector<double> dx(x.numel(), c.grad()[0]);
            x.accumulate_grad(dx);
        });
    }
    return c;
}

Tensor dropout(Tensor x, double p, Rng& rng, bool training) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: rate must be in [0,1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    const std::size_t n = x.numel();
    const double keep = 1.0 - p;
    std::vector<double> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = rng.uniform() < p ? 0.0 : 1.0 / keep;
    std::vector<double> out(n);
    const auto xv = x.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = xv[i] * mask[i];
    const bool rec = want_grad({&x});
    Tensor c = Tensor::from_data(x.shape(), std::move(out), rec, x.dtype());
    if (rec) {
        auto saved = std::make_shared<std::vector<double>>(std::move(mask));
        Tape::current()->record("dropout", {x.id()}, c, [x, c, saved]() mutable {
            if (!c.has_grad()) return;
            const auto g = c.grad();
            std::vector<double> dx(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * (*saved)[i];
            x.accumulate_grad(dx);
        });
    }
    return c;
}

}  // namespace dialogxl
