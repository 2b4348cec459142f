// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include "dscls/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dscls {

// ---- Var / Tape -----------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    for (const auto& in : inputs) {
        if (in.tape() != this) {
            throw std::invalid_argument("op inputs belong to a different tape");
        }
        n.inputs.push_back(in.id());
        n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
    }
    if (n.requires_grad) {
        n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::grad(std::size_t id) const {
    return nodes_[id].grad;
}

Tensor& Tape::grad_mut(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.data.size() != n.value.data.size()) {
        n.grad = Tensor(n.value.shape, 0.0);
    }
    return n.grad;
}

void Tape::backward(Var root) {
    if (root.tape() != this) {
        throw std::invalid_argument("backward root belongs to a different tape");
    }
    if (root.value().numel() != 1) {
        throw ShapeError("backward root must be a scalar, got shape " + shape_str(root.shape()));
    }
    visited_.clear();
    grad_mut(root.id()).data[0] += 1.0;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.backward || n.grad.data.empty()) {
            continue;
        }
        visited_.push_back(i);
        n.backward(*this, i);
    }
}

// ---- kernels --------------------------------------------------------------

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
    }
}

void require_rank2(const char* op, const Tensor& a) {
    if (a.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(a.shape));
    }
}

// c[m,n] += a[m,k] * b[k,n], each operand optionally transposed in storage.
void gemm_acc(const double* a, bool ta, const double* b, bool tb, double* c, std::size_t m,
              std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ta ? a[p * m + i] : a[i * k + p];
            if (av == 0.0) {
                continue;
            }
            if (!tb) {
                const double* brow = b + p * n;
                for (std::size_t j = 0; j < n; ++j) {
                    crow[j] += av * brow[j];
                }
            } else {
                for (std::size_t j = 0; j < n; ++j) {
                    crow[j] += av * b[j * k + p];
                }
            }
        }
    }
}

void accumulate(Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < dst.data.size(); ++i) {
        dst.data[i] += src.data[i];
    }
}

} // namespace

// ---- elementwise ------------------------------------------------------------

Var add(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    Tape& t = *a.tape();
    if (av.shape == bv.shape) {
        Tensor out = av;
        accumulate(out, bv);
        const Var ins[] = {a, b};
        return t.record(std::move(out), ins, [ia = a.id(), ib = b.id()](Tape& tp, std::size_t self) {
            const Tensor& g = tp.grad(self);
            if (tp.requires_grad(ia)) {
                accumulate(tp.grad_mut(ia), g);
            }
            if (tp.requires_grad(ib)) {
                accumulate(tp.grad_mut(ib), g);
            }
        });
    }
    if (bv.rank() == 1 && av.rank() >= 1 && bv.shape[0] == av.cols()) {
        Tensor out = av;
        const std::size_t n = av.cols();
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            out.data[i] += bv.data[i % n];
        }
        const Var ins[] = {a, b};
        return t.record(std::move(out), ins, [ia = a.id(), ib = b.id(), n](Tape& tp, std::size_t self) {
            const Tensor& g = tp.grad(self);
            if (tp.requires_grad(ia)) {
                accumulate(tp.grad_mut(ia), g);
            }
            if (tp.requires_grad(ib)) {
                Tensor& gb = tp.grad_mut(ib);
                for (std::size_t i = 0; i < g.data.size(); ++i) {
                    gb.data[i % n] += g.data[i];
                }
            }
        });
    }
    throw ShapeError("add: shape mismatch " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
}

Var sub(Var a, Var b) {
    require_same_shape("sub", a.value(), b.value());
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] -= bv.data[i];
    }
    const Var ins[] = {a, b};
    return a.tape()->record(std::move(out), ins, [ia = a.id(), ib = b.id()](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(ia)) {
            accumulate(tp.grad_mut(ia), g);
        }
        if (tp.requires_grad(ib)) {
            Tensor& gb = tp.grad_mut(ib);
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                gb.data[i] -= g.data[i];
            }
        }
    });
}

Var mul(Var a, Var b) {
    require_same_shape("mul", a.value(), b.value());
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] *= bv.data[i];
    }
    const Var ins[] = {a, b};
    return a.tape()->record(std::move(out), ins, [ia = a.id(), ib = b.id()](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& av = tp.value(ia);
        const Tensor& bv = tp.value(ib);
        if (tp.requires_grad(ia)) {
            Tensor& ga = tp.grad_mut(ia);
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                ga.data[i] += g.data[i] * bv.data[i];
            }
        }
        if (tp.requires_grad(ib)) {
            Tensor& gb = tp.grad_mut(ib);
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                gb.data[i] += g.data[i] * av.data[i];
            }
        }
    });
}

Var scale(Var a, double s) {
    Tensor out = a.value();
    for (auto& v : out.data) {
        v *= s;
    }
    const Var ins[] = {a};
    return a.tape()->record(std::move(out), ins, [ia = a.id(), s](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad_mut(ia);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += s * g.data[i];
        }
    });
}

namespace {

template <class Fwd, class Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
    const Tensor& av = a.value();
    Tensor out(av.shape);
    for (std::size_t i = 0; i < av.data.size(); ++i) {
        out.data[i] = fwd(av.data[i]);
    }
    const Var ins[] = {a};
    return a.tape()->record(std::move(out), ins, [ia = a.id(), deriv](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& x = tp.value(ia);
        const Tensor& y = tp.value(self);
        Tensor& ga = tp.grad_mut(ia);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] += g.data[i] * deriv(x.data[i], y.data[i]);
        }
    });
}

} // namespace

Var relu(Var x) {
    return unary(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var gelu(Var x) {
    return unary(
        x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); },
        [](double v, double) {
            const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
            const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
            return cdf + v * pdf;
        });
}

Var tanh_op(Var x) {
    return unary(
        x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
    return unary(
        x,
        [](double v) {
            if (v >= 0.0) {
                return 1.0 / (1.0 + std::exp(-v));
            }
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

// ---- linear algebra ---------------------------------------------------------

Var matmul(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_rank2("matmul", av);
    require_rank2("matmul", bv);
    if (av.shape[1] != bv.shape[0]) {
        throw ShapeError("matmul: shape mismatch " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
    }
    const std::size_t m = av.shape[0], k = av.shape[1], n = bv.shape[1];
    Tensor out({m, n});
    gemm_acc(av.data.data(), false, bv.data.data(), false, out.data.data(), m, k, n);
    const Var ins[] = {a, b};
    return a.tape()->record(std::move(out), ins, [ia = a.id(), ib = b.id(), m, k, n](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(ia)) {
            // dA[m,k] = G[m,n] * B^T
            gemm_acc(g.data.data(), false, tp.value(ib).data.data(), true, tp.grad_mut(ia).data.data(), m, n, k);
        }
        if (tp.requires_grad(ib)) {
            // dB[k,n] = A^T * G
            gemm_acc(tp.value(ia).data.data(), true, g.data.data(), false, tp.grad_mut(ib).data.data(), k, m, n);
        }
    });
}

Var transpose(Var a) {
    const Tensor& av = a.value();
    require_rank2("transpose", av);
    const std::size_t m = av.shape[0], n = av.shape[1];
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out.data[j * m + i] = av.data[i * n + j];
        }
    }
    const Var ins[] = {a};
    return a.tape()->record(std::move(out), ins, [ia = a.id(), m, n](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad_mut(ia);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                ga.data[i * n + j] += g.data[j * m + i];
            }
        }
    });
}

Var embedding(Var table, std::span<const int> ids) {
    const Tensor& tv = table.value();
    require_rank2("embedding", tv);
    const std::size_t vocab = tv.shape[0], hidden = tv.shape[1];
    Tensor out({ids.size(), hidden});
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab) {
            throw std::out_of_range("embedding: id " + std::to_string(ids[r]) + " out of range for table " +
                                    shape_str(tv.shape));
        }
        std::copy_n(tv.data.begin() + static_cast<std::ptrdiff_t>(ids[r] * hidden), hidden,
                    out.data.begin() + static_cast<std::ptrdiff_t>(r * hidden));
    }
    const Var ins[] = {table};
    return table.tape()->record(
        std::move(out), ins,
        [it = table.id(), idv = std::vector<int>(ids.begin(), ids.end()), hidden](Tape& tp, std::size_t self) {
            const Tensor& g = tp.grad(self);
            Tensor& gt = tp.grad_mut(it);
            for (std::size_t r = 0; r < idv.size(); ++r) {
                double* dst = gt.data.data() + static_cast<std::size_t>(idv[r]) * hidden;
                const double* src = g.data.data() + r * hidden;
                for (std::size_t j = 0; j < hidden; ++j) {
                    dst[j] += src[j];
                }
            }
        });
}

Var layernorm(Var x, Var gamma, Var beta, double eps) {
    const Tensor& xv = x.value();
    const std::size_t n = xv.cols(), m = xv.rows();
    if (gamma.shape() != Shape{n} || beta.shape() != Shape{n}) {
        throw ShapeError("layernorm: shape mismatch " + shape_str(xv.shape) + " vs " + shape_str(gamma.shape()) +
                         "/" + shape_str(beta.shape()));
    }
    const auto& gv = gamma.value().data;
    const auto& bv = beta.value().data;
    Tensor out(xv.shape);
    std::vector<double> xhat(xv.data.size());
    std::vector<double> inv_std(m);
    for (std::size_t r = 0; r < m; ++r) {
        const double* row = xv.data.data() + r * n;
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            mu += row[j];
        }
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            var += (row[j] - mu) * (row[j] - mu);
        }
        var /= static_cast<double>(n);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            const double h = (row[j] - mu) * inv_std[r];
            xhat[r * n + j] = h;
            out.data[r * n + j] = h * gv[j] + bv[j];
        }
    }
    const Var ins[] = {x, gamma, beta};
    return x.tape()->record(
        std::move(out), ins,
        [ix = x.id(), ig = gamma.id(), ib = beta.id(), xhat = std::move(xhat), inv_std = std::move(inv_std), m,
         n](Tape& tp, std::size_t self) {
            const Tensor& g = tp.grad(self);
            const auto& gv = tp.value(ig).data;
            if (tp.requires_grad(ig)) {
                Tensor& gg = tp.grad_mut(ig);
                for (std::size_t i = 0; i < g.data.size(); ++i) {
                    gg.data[i % n] += g.data[i] * xhat[i];
                }
            }
            if (tp.requires_grad(ib)) {
                Tensor& gb = tp.grad_mut(ib);
                for (std::size_t i = 0; i < g.data.size(); ++i) {
                    gb.data[i % n] += g.data[i];
                }
            }
            if (tp.requires_grad(ix)) {
                Tensor& gx = tp.grad_mut(ix);
                const double dn = static_cast<double>(n);
                for (std::size_t r = 0; r < m; ++r) {
                    double s1 = 0.0, s2 = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double dh = g.data[r * n + j] * gv[j];
                        s1 += dh;
                        s2 += dh * xhat[r * n + j];
                    }
                    for (std::size_t j = 0; j < n; ++j) {
                        const double dh = g.data[r * n + j] * gv[j];
                        gx.data[r * n + j] += inv_std[r] / dn * (dn * dh - s1 - xhat[r * n + j] * s2);
                    }
                }
            }
        });
}

Var softmax(Var x, std::span<const std::uint8_t> key_mask) {
    const Tensor& xv = x.value();
    const std::size_t n = xv.cols(), m = xv.rows();
    if (!key_mask.empty() && key_mask.size() != n) {
        throw ShapeError("softmax: mask of length " + std::to_string(key_mask.size()) + " vs input " +
                         shape_str(xv.shape));
    }
    auto valid = [&](std::size_t j) { return key_mask.empty() || key_mask[j] != 0; };
    Tensor out(xv.shape, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        const double* row = xv.data.data() + r * n;
        double* orow = out.data.data() + r * n;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < n; ++j) {
            if (valid(j)) {
                mx = std::max(mx, row[j]);
            }
        }
        if (mx == -INFINITY) {
            continue; // fully masked row stays all-zero
        }
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (valid(j)) {
                orow[j] = std::exp(row[j] - mx);
                z += orow[j];
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            orow[j] /= z;
        }
    }
    const Var ins[] = {x};
    return x.tape()->record(std::move(out), ins, [ix = x.id(), m, n](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& p = tp.value(self);
        Tensor& gx = tp.grad_mut(ix);
        for (std::size_t r = 0; r < m; ++r) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                dot += g.data[r * n + j] * p.data[r * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) {
                gx.data[r * n + j] += p.data[r * n + j] * (g.data[r * n + j] - dot);
            }
        }
    });
}

Var dropout(Var x, double rate, bool train, CounterRng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(rate));
    }
    if (!train || rate == 0.0) {
        return x;
    }
    const Tensor& xv = x.value();
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(xv.data.size());
    Tensor out(xv.shape);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
        out.data[i] = xv.data[i] * mask[i];
    }
    const Var ins[] = {x};
    return x.tape()->record(std::move(out), ins, [ix = x.id(), mask = std::move(mask)](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad_mut(ix);
        for (std::size_t i = 0; i < mask.size(); ++i) {
            gx.data[i] += g.data[i] * mask[i];
        }
    });
}

// ---- reductions and losses ----------------------------------------------------

Var sum(Var x) {
    double s = 0.0;
    for (double v : x.value().data) {
        s += v;
    }
    const Var ins[] = {x};
    return x.tape()->record(Tensor::scalar(s), ins, [ix = x.id()](Tape& tp, std::size_t self) {
        const double g = tp.grad(self).data[0];
        for (auto& v : tp.grad_mut(ix).data) {
            v += g;
        }
    });
}

Var mean(Var x) {
    const std::size_t n = x.value().numel();
    if (n == 0) {
        throw ShapeError("mean: empty tensor");
    }
    return scale(sum(x), 1.0 / static_cast<double>(n));
}

namespace {

void check_labels(const char* op, const Tensor& logits, std::span<const int> labels, std::size_t classes) {
    if (logits.rank() != 2 || logits.shape[0] != labels.size()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(logits.shape) + " vs labels [" +
                         std::to_string(labels.size()) + "]");
    }
    if (labels.empty()) {
        throw ShapeError(std::string(op) + ": empty batch");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw std::out_of_range(std::string(op) + ": label " + std::to_string(y) + " out of range for " +
                                    std::to_string(classes) + " classes");
        }
    }
}

} // namespace

Var cross_entropy(Var logits, std::span<const int> labels) {
    const Tensor& lv = logits.value();
    const std::size_t c = lv.rank() == 2 ? lv.shape[1] : 0;
    check_labels("cross_entropy", lv, labels, c);
    const std::size_t m = labels.size();
    Tensor probs(lv.shape);
    double loss = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        const double* row = lv.data.data() + r * c;
        const double mx = *std::max_element(row, row + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            z += std::exp(row[j] - mx);
        }
        const double lse = mx + std::log(z);
        loss += lse - row[labels[r]];
        for (std::size_t j = 0; j < c; ++j) {
            probs.data[r * c + j] = std::exp(row[j] - lse);
        }
    }
    loss /= static_cast<double>(m);
    const Var ins[] = {logits};
    return logits.tape()->record(
        Tensor::scalar(loss), ins,
        [il = logits.id(), probs = std::move(probs), y = std::vector<int>(labels.begin(), labels.end()), m,
         c](Tape& tp, std::size_t self) {
            const double g = tp.grad(self).data[0] / static_cast<double>(m);
            Tensor& gl = tp.grad_mut(il);
            for (std::size_t r = 0; r < m; ++r) {
                for (std::size_t j = 0; j < c; ++j) {
                    const double onehot = static_cast<std::size_t>(y[r]) == j ? 1.0 : 0.0;
                    gl.data[r * c + j] += g * (probs.data[r * c + j] - onehot);
                }
            }
        });
}

Var binary_cross_entropy_with_sigmoid(Var logits, std::span<const int> labels) {
    const Tensor& lv = logits.value();
    if (lv.rank() != 2 || lv.shape[1] != 1) {
        throw ShapeError("binary_cross_entropy_with_sigmoid: expected [m,1] logits, got " + shape_str(lv.shape));
    }
    check_labels("binary_cross_entropy_with_sigmoid", lv, labels, 2);
    const std::size_t m = labels.size();
    double loss = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        const double z = lv.data[r];
        loss += std::max(z, 0.0) - z * labels[r] + std::log1p(std::exp(-std::abs(z)));
    }
    loss /= static_cast<double>(m);
    const Var ins[] = {logits};
    return logits.tape()->record(
        Tensor::scalar(loss), ins,
        [il = logits.id(), y = std::vector<int>(labels.begin(), labels.end()), m](Tape& tp, std::size_t self) {
            const double g = tp.grad(self).data[0] / static_cast<double>(m);
            const Tensor& z = tp.value(il);
            Tensor& gl = tp.grad_mut(il);
            for (std::size_t r = 0; r < m; ++r) {
                const double v = z.data[r];
                const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
                gl.data[r] += g * (s - y[r]);
            }
        });
}

// ---- slicing ------------------------------------------------------------------

Var slice(Var x, std::size_t row0, std::size_t nrows, std::size_t col0, std::size_t ncols) {
    const Tensor& xv = x.value();
    require_rank2("slice", xv);
    const std::size_t n = xv.shape[1];
    if (row0 + nrows > xv.shape[0] || col0 + ncols > n) {
        throw ShapeError("slice: block [" + std::to_string(row0) + "+" + std::to_string(nrows) + ", " +
                         std::to_string(col0) + "+" + std::to_string(ncols) + "] outside " + shape_str(xv.shape));
    }
    Tensor out({nrows, ncols});
    for (std::size_t r = 0; r < nrows; ++r) {
        std::copy_n(xv.data.begin() + static_cast<std::ptrdiff_t>((row0 + r) * n + col0), ncols,
                    out.data.begin() + static_cast<std::ptrdiff_t>(r * ncols));
    }
    const Var ins[] = {x};
    return x.tape()->record(std::move(out), ins, [ix = x.id(), row0, nrows, col0, ncols, n](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad_mut(ix);
        for (std::size_t r = 0; r < nrows; ++r) {
            for (std::size_t j = 0; j < ncols; ++j) {
                gx.data[(row0 + r) * n + col0 + j] += g.data[r * ncols + j];
            }
        }
    });
}

Var select_rows(Var x, std::span<const std::size_t> rows) {
    const Tensor& xv = x.value();
    require_rank2("select_rows", xv);
    const std::size_t n = xv.shape[1];
    Tensor out({rows.size(), n});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= xv.shape[0]) {
            throw ShapeError("select_rows: row " + std::to_string(rows[r]) + " outside " + shape_str(xv.shape));
        }
        std::copy_n(xv.data.begin() + static_cast<std::ptrdiff_t>(rows[r] * n), n,
                    out.data.begin() + static_cast<std::ptrdiff_t>(r * n));
    }
    const Var ins[] = {x};
    return x.tape()->record(
        std::move(out), ins,
        [ix = x.id(), rv = std::vector<std::size_t>(rows.begin(), rows.end()), n](Tape& tp, std::size_t self) {
            const Tensor& g = tp.grad(self);
            Tensor& gx = tp.grad_mut(ix);
            for (std::size_t r = 0; r < rv.size(); ++r) {
                for (std::size_t j = 0; j < n; ++j) {
                    gx.data[rv[r] * n + j] += g.data[r * n + j];
                }
            }
        });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) {
        throw ShapeError("concat_rows: no inputs");
    }
    const std::size_t n = parts[0].value().cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_rank2("concat_rows", p.value());
        if (p.value().shape[1] != n) {
            throw ShapeError("concat_rows: shape mismatch " + shape_str(parts[0].shape()) + " vs " +
                             shape_str(p.shape()));
        }
        total += p.value().shape[0];
    }
    Tensor out({total, n});
    std::size_t offset = 0;
    std::vector<std::size_t> ids;
    for (const auto& p : parts) {
        std::copy(p.value().data.begin(), p.value().data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += p.value().numel();
        ids.push_back(p.id());
    }
    return parts[0].tape()->record(std::move(out), parts, [ids = std::move(ids)](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        std::size_t offset = 0;
        for (auto id : ids) {
            const std::size_t len = tp.value(id).numel();
            if (tp.requires_grad(id)) {
                Tensor& gp = tp.grad_mut(id);
                for (std::size_t i = 0; i < len; ++i) {
                    gp.data[i] += g.data[offset + i];
                }
            }
            offset += len;
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) {
        throw ShapeError("concat_cols: no inputs");
    }
    const std::size_t m = parts[0].value().rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_rank2("concat_cols", p.value());
        if (p.value().shape[0] != m) {
            throw ShapeError("concat_cols: shape mismatch " + shape_str(parts[0].shape()) + " vs " +
                             shape_str(p.shape()));
        }
        total += p.value().shape[1];
    }
    Tensor out({m, total});
    std::vector<std::size_t> ids;
    std::size_t col = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.value().shape[1];
        for (std::size_t r = 0; r < m; ++r) {
            std::copy_n(p.value().data.begin() + static_cast<std::ptrdiff_t>(r * w), w,
                        out.data.begin() + static_cast<std::ptrdiff_t>(r * total + col));
        }
        col += w;
        ids.push_back(p.id());
    }
    return parts[0].tape()->record(std::move(out), parts, [ids = std::move(ids), m, total](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        std::size_t col = 0;
        for (auto id : ids) {
            const std::size_t w = tp.value(id).shape[1];
            if (tp.requires_grad(id)) {
                Tensor& gp = tp.grad_mut(id);
                for (std::size_t r = 0; r < m; ++r) {
                    for (std::size_t j = 0; j < w; ++j) {
                        gp.data[r * w + j] += g.data[r * total + col + j];
                    }
                }
            }
            col += w;
        }
    });
}

// ---- grad check -----------------------------------------------------------------

namespace {

double eval_scalar(const MultiScalarFn& f, const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(xs.size());
    for (const auto& x : xs) {
        vars.push_back(tape.constant(x));
    }
    const Var out = f(tape, vars);
    if (out.value().numel() != 1) {
        throw ShapeError("grad_check: function must return a scalar, got " + shape_str(out.shape()));
    }
    return out.value().data[0];
}

void require_finite(double v) {
    if (!std::isfinite(v)) {
        throw std::runtime_error("non-finite in grad check");
    }
}

} // namespace

std::vector<double> grad_check(const MultiScalarFn& f, const std::vector<Tensor>& xs, double h) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("grad_check: step must be positive");
    }
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : xs) {
        vars.push_back(tape.leaf(x));
    }
    const Var out = f(tape, vars);
    require_finite(out.value().data.at(0));
    tape.backward(out);

    std::vector<double> errors(xs.size(), 0.0);
    std::vector<Tensor> probe = xs;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        const Tensor& analytic = vars[t].grad();
        for (std::size_t i = 0; i < xs[t].numel(); ++i) {
            const double a = analytic.data.empty() ? 0.0 : analytic.data[i];
            require_finite(a);
            const double orig = probe[t].data[i];
            probe[t].data[i] = orig + h;
            const double fp = eval_scalar(f, probe);
            probe[t].data[i] = orig - h;
            const double fm = eval_scalar(f, probe);
            probe[t].data[i] = orig;
            require_finite(fp);
            require_finite(fm);
            const double numeric = (fp - fm) / (2.0 * h);
            errors[t] = std::max(errors[t], std::abs(a - numeric) / std::max(1.0, std::abs(a)));
        }
    }
    return errors;
}

double grad_check(const ScalarFn& f, const Tensor& x, double h) {
    const MultiScalarFn wrapped = [&f](Tape& tape, const std::vector<Var>& vs) { return f(tape, vs[0]); };
    return grad_check(wrapped, std::vector<Tensor>{x}, h)[0];
}

} // namespace dscls
