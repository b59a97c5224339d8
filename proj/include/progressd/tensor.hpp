// Dense 64-bit tensors with reverse-mode gradients. Covers exactly the
// primitives the progress model needs: dense/conv layers, pointwise
// nonlinearities, pooling, concatenation, dropout, attention arithmetic
// and the MAE loss.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "progressd/common.hpp"

namespace progressd::nn {

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) {
        check(d > 0, "tensor shape has non-positive dim ", d);
        n *= d;
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// One entry in the computation record. Intermediate nodes hold their
// consumers' backward closures; leaves (parameters, inputs) have no parents.
struct Node {
    std::uint64_t id = 0;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; // allocated on first accumulation
    bool requires_grad = false;
    bool released = false; // set once backward has consumed this record
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};

namespace detail {
inline std::uint64_t next_node_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
}
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}
} // namespace detail

// Disables graph recording in scope; evaluation paths run under this.
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

inline bool grad_enabled() { return detail::grad_mode(); }

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    static Tensor from_data(Shape shape, std::vector<double> data,
                            bool requires_grad = false) {
        check(numel(shape) == static_cast<std::int64_t>(data.size()),
              "tensor data size ", data.size(), " does not match shape ",
              shape_str(shape));
        check(all_finite(data), "tensor created with non-finite values");
        auto n = std::make_shared<Node>();
        n->id = detail::next_node_id();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto total = static_cast<std::size_t>(numel(shape));
        return from_data(std::move(shape), std::vector<double>(total, 0.0),
                         requires_grad);
    }

    static Tensor full(Shape shape, double v, bool requires_grad = false) {
        auto total = static_cast<std::size_t>(numel(shape));
        return from_data(std::move(shape), std::vector<double>(total, v),
                         requires_grad);
    }

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    std::int64_t size() const { return static_cast<std::int64_t>(n_->value.size()); }
    std::uint64_t id() const { return n_->id; }
    bool requires_grad() const { return n_->requires_grad; }

    const std::vector<double>& value() const { return n_->value; }
    // In-place access for parameter loading and optimizer updates. The caller
    // is responsible for keeping values finite.
    std::vector<double>& value_mut() { return n_->value; }

    bool has_grad() const { return !n_->grad.empty(); }
    const std::vector<double>& grad() const { return n_->grad; }
    std::vector<double>& grad_mut() { return n_->grad; }
    void zero_grad() { std::fill(n_->grad.begin(), n_->grad.end(), 0.0); }

    double item() const {
        check(size() == 1, "item() on tensor of shape ", shape_str(shape()));
        return n_->value[0];
    }

    std::shared_ptr<Node> node() const { return n_; }

private:
    std::shared_ptr<Node> n_;
};

namespace detail {

inline Tensor make_op(const char* kind, Shape shape, std::vector<double> value,
                      std::vector<std::shared_ptr<Node>> parents,
                      std::function<void(Node&)> backward_fn) {
    check(numel(shape) == static_cast<std::int64_t>(value.size()),
          kind, ": internal result size mismatch");
    if (!all_finite(value))
        fail(kind, ": produced non-finite values");
    auto n = std::make_shared<Node>();
    n->id = next_node_id();
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool track = grad_mode();
    if (track) {
        bool any = false;
        for (const auto& p : parents) any = any || p->requires_grad;
        track = any;
    }
    if (track) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(n));
}

inline void accumulate(Node& dst, std::size_t idx, double v) {
    dst.grad[idx] += v;
}

} // namespace detail

// ---------------------------------------------------------------------------
// pointwise ops
// ---------------------------------------------------------------------------

inline Tensor relu(const Tensor& x) {
    std::vector<double> y(x.value().size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(0.0, x.value()[i]);
    return detail::make_op("relu", x.shape(), std::move(y), {x.node()},
                           [](Node& self) {
                               Node& p = *self.parents[0];
                               if (!p.requires_grad) return;
                               p.ensure_grad();
                               for (std::size_t i = 0; i < self.grad.size(); ++i)
                                   if (p.value[i] > 0.0) p.grad[i] += self.grad[i];
                           });
}

inline Tensor sigmoid(const Tensor& x) {
    std::vector<double> y(x.value().size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        double v = x.value()[i];
        // split by sign so exp never overflows
        y[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                        : std::exp(v) / (1.0 + std::exp(v));
    }
    return detail::make_op("sigmoid", x.shape(), std::move(y), {x.node()},
                           [](Node& self) {
                               Node& p = *self.parents[0];
                               if (!p.requires_grad) return;
                               p.ensure_grad();
                               for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                   double s = self.value[i];
                                   p.grad[i] += self.grad[i] * s * (1.0 - s);
                               }
                           });
}

inline Tensor tanh_act(const Tensor& x) {
    std::vector<double> y(x.value().size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(x.value()[i]);
    return detail::make_op("tanh", x.shape(), std::move(y), {x.node()},
                           [](Node& self) {
                               Node& p = *self.parents[0];
                               if (!p.requires_grad) return;
                               p.ensure_grad();
                               for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                   double t = self.value[i];
                                   p.grad[i] += self.grad[i] * (1.0 - t * t);
                               }
                           });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "add: shape mismatch ", shape_str(a.shape()),
          " vs ", shape_str(b.shape()));
    std::vector<double> y(a.value().size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
    return detail::make_op("add", a.shape(), std::move(y), {a.node(), b.node()},
                           [](Node& self) {
                               for (int k = 0; k < 2; ++k) {
                                   Node& p = *self.parents[k];
                                   if (!p.requires_grad) continue;
                                   p.ensure_grad();
                                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                                       p.grad[i] += self.grad[i];
                               }
                           });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "mul: shape mismatch ", shape_str(a.shape()),
          " vs ", shape_str(b.shape()));
    std::vector<double> y(a.value().size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
    return detail::make_op("mul", a.shape(), std::move(y), {a.node(), b.node()},
                           [](Node& self) {
                               Node& pa = *self.parents[0];
                               Node& pb = *self.parents[1];
                               if (pa.requires_grad) {
                                   pa.ensure_grad();
                                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                                       pa.grad[i] += self.grad[i] * pb.value[i];
                               }
                               if (pb.requires_grad) {
                                   pb.ensure_grad();
                                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                                       pb.grad[i] += self.grad[i] * pa.value[i];
                               }
                           });
}

inline Tensor scale(const Tensor& x, double c) {
    check(std::isfinite(c), "scale: non-finite factor");
    std::vector<double> y(x.value().size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = c * x.value()[i];
    return detail::make_op("scale", x.shape(), std::move(y), {x.node()},
                           [c](Node& self) {
                               Node& p = *self.parents[0];
                               if (!p.requires_grad) return;
                               p.ensure_grad();
                               for (std::size_t i = 0; i < self.grad.size(); ++i)
                                   p.grad[i] += c * self.grad[i];
                           });
}

// ---------------------------------------------------------------------------
// matrix ops (2-D tensors, row-major)
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.shape().size() == 2 && b.shape().size() == 2,
          "matmul: needs 2-D operands, got ", shape_str(a.shape()), " and ",
          shape_str(b.shape()));
    const int m = a.shape()[0], k = a.shape()[1];
    const int k2 = b.shape()[0], n = b.shape()[1];
    check(k == k2, "matmul: inner dims differ, ", shape_str(a.shape()), " x ",
          shape_str(b.shape()));
    std::vector<double> y(static_cast<std::size_t>(m) * n, 0.0);
    const double* A = a.value().data();
    const double* B = b.value().data();
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            double av = A[i * k + p];
            const double* Brow = B + p * n;
            double* Yrow = y.data() + i * n;
            for (int j = 0; j < n; ++j) Yrow[j] += av * Brow[j];
        }
    return detail::make_op(
        "matmul", {m, n}, std::move(y), {a.node(), b.node()},
        [m, k, n](Node& self) {
            Node& pa = *self.parents[0];
            Node& pb = *self.parents[1];
            const double* G = self.grad.data();
            if (pa.requires_grad) {
                pa.ensure_grad();
                const double* B = pb.value.data();
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double acc = 0.0;
                        const double* Grow = G + i * n;
                        const double* Brow = B + p * n;
                        for (int j = 0; j < n; ++j) acc += Grow[j] * Brow[j];
                        pa.grad[i * k + p] += acc;
                    }
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                const double* A = pa.value.data();
                for (int p = 0; p < k; ++p)
                    for (int i = 0; i < m; ++i) {
                        double av = A[i * k + p];
                        const double* Grow = G + i * n;
                        double* Drow = pb.grad.data() + p * n;
                        for (int j = 0; j < n; ++j) Drow[j] += av * Grow[j];
                    }
            }
        });
}

// y = x W + b with b broadcast across rows. x: [m,k], W: [k,n], b: [1,n].
inline Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    check(x.shape().size() == 2 && w.shape().size() == 2 && b.shape().size() == 2,
          "affine: needs 2-D operands");
    const int m = x.shape()[0], k = x.shape()[1];
    const int n = w.shape()[1];
    check(w.shape()[0] == k, "affine: input width ", k, " vs weight ",
          shape_str(w.shape()));
    check(b.shape()[0] == 1 && b.shape()[1] == n, "affine: bias shape ",
          shape_str(b.shape()), " does not match output width ", n);
    std::vector<double> y(static_cast<std::size_t>(m) * n);
    const double* X = x.value().data();
    const double* W = w.value().data();
    const double* B = b.value().data();
    for (int i = 0; i < m; ++i) std::copy(B, B + n, y.data() + i * n);
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            double xv = X[i * k + p];
            const double* Wrow = W + p * n;
            double* Yrow = y.data() + i * n;
            for (int j = 0; j < n; ++j) Yrow[j] += xv * Wrow[j];
        }
    return detail::make_op(
        "affine", {m, n}, std::move(y), {x.node(), w.node(), b.node()},
        [m, k, n](Node& self) {
            Node& px = *self.parents[0];
            Node& pw = *self.parents[1];
            Node& pb = *self.parents[2];
            const double* G = self.grad.data();
            if (px.requires_grad) {
                px.ensure_grad();
                const double* W = pw.value.data();
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double acc = 0.0;
                        const double* Grow = G + i * n;
                        const double* Wrow = W + p * n;
                        for (int j = 0; j < n; ++j) acc += Grow[j] * Wrow[j];
                        px.grad[i * k + p] += acc;
                    }
            }
            if (pw.requires_grad) {
                pw.ensure_grad();
                const double* X = px.value.data();
                for (int p = 0; p < k; ++p)
                    for (int i = 0; i < m; ++i) {
                        double xv = X[i * k + p];
                        const double* Grow = G + i * n;
                        double* Drow = pw.grad.data() + p * n;
                        for (int j = 0; j < n; ++j) Drow[j] += xv * Grow[j];
                    }
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) pb.grad[j] += G[i * n + j];
            }
        });
}

inline Tensor transpose2d(const Tensor& x) {
    check(x.shape().size() == 2, "transpose: needs 2-D input, got ",
          shape_str(x.shape()));
    const int m = x.shape()[0], n = x.shape()[1];
    std::vector<double> y(x.value().size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) y[j * m + i] = x.value()[i * n + j];
    return detail::make_op("transpose", {n, m}, std::move(y), {x.node()},
                           [m, n](Node& self) {
                               Node& p = *self.parents[0];
                               if (!p.requires_grad) return;
                               p.ensure_grad();
                               for (int i = 0; i < m; ++i)
                                   for (int j = 0; j < n; ++j)
                                       p.grad[i * n + j] += self.grad[j * m + i];
                           });
}

inline Tensor reshape(const Tensor& x, Shape new_shape) {
    check(numel(new_shape) == x.size(), "reshape: cannot view ",
          shape_str(x.shape()), " as ", shape_str(new_shape));
    std::vector<double> y = x.value();
    return detail::make_op("reshape", std::move(new_shape), std::move(y),
                           {x.node()}, [](Node& self) {
                               Node& p = *self.parents[0];
                               if (!p.requires_grad) return;
                               p.ensure_grad();
                               for (std::size_t i = 0; i < self.grad.size(); ++i)
                                   p.grad[i] += self.grad[i];
                           });
}

// Rows [r0,r1) and columns [c0,c1) of a 2-D tensor.
inline Tensor slice2d(const Tensor& x, int r0, int r1, int c0, int c1) {
    check(x.shape().size() == 2, "slice: needs 2-D input");
    const int m = x.shape()[0], n = x.shape()[1];
    check(0 <= r0 && r0 < r1 && r1 <= m && 0 <= c0 && c0 < c1 && c1 <= n,
          "slice: window rows [", r0, ",", r1, ") cols [", c0, ",", c1,
          ") out of range for ", shape_str(x.shape()));
    const int h = r1 - r0, w = c1 - c0;
    std::vector<double> y(static_cast<std::size_t>(h) * w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            y[i * w + j] = x.value()[(r0 + i) * n + (c0 + j)];
    return detail::make_op("slice", {h, w}, std::move(y), {x.node()},
                           [r0, c0, n, h, w](Node& self) {
                               Node& p = *self.parents[0];
                               if (!p.requires_grad) return;
                               p.ensure_grad();
                               for (int i = 0; i < h; ++i)
                                   for (int j = 0; j < w; ++j)
                                       p.grad[(r0 + i) * n + (c0 + j)] +=
                                           self.grad[i * w + j];
                           });
}

// Concatenates 2-D tensors along rows (axis 0) or columns (axis 1).
inline Tensor concat(const std::vector<Tensor>& xs, int axis) {
    check(!xs.empty(), "concat: needs at least one input");
    check(axis == 0 || axis == 1, "concat: axis must be 0 or 1, got ", axis);
    for (const auto& t : xs)
        check(t.shape().size() == 2, "concat: needs 2-D inputs, got ",
              shape_str(t.shape()));
    const int fixed = axis == 0 ? xs[0].shape()[1] : xs[0].shape()[0];
    int total = 0;
    for (const auto& t : xs) {
        int f = axis == 0 ? t.shape()[1] : t.shape()[0];
        check(f == fixed, "concat: mismatched dim ", f, " vs ", fixed,
              " along axis ", 1 - axis);
        total += t.shape()[axis];
    }
    Shape out_shape = axis == 0 ? Shape{total, fixed} : Shape{fixed, total};
    std::vector<double> y(static_cast<std::size_t>(total) * fixed);
    std::vector<std::shared_ptr<Node>> parents;
    parents.reserve(xs.size());
    int offset = 0;
    const int out_cols = out_shape[1];
    for (const auto& t : xs) {
        const int r = t.shape()[0], c = t.shape()[1];
        if (axis == 0) {
            std::copy(t.value().begin(), t.value().end(),
                      y.begin() + static_cast<std::size_t>(offset) * c);
            offset += r;
        } else {
            for (int i = 0; i < r; ++i)
                std::copy(t.value().begin() + static_cast<std::size_t>(i) * c,
                          t.value().begin() + static_cast<std::size_t>(i + 1) * c,
                          y.begin() + static_cast<std::size_t>(i) * out_cols + offset);
            offset += c;
        }
        parents.push_back(t.node());
    }
    return detail::make_op(
        "concat", out_shape, std::move(y), std::move(parents),
        [axis, out_cols](Node& self) {
            int off = 0;
            for (auto& pp : self.parents) {
                Node& p = *pp;
                const int r = p.shape[0], c = p.shape[1];
                if (p.requires_grad) {
                    p.ensure_grad();
                    if (axis == 0) {
                        for (int i = 0; i < r; ++i)
                            for (int j = 0; j < c; ++j)
                                p.grad[i * c + j] += self.grad[(off + i) * c + j];
                    } else {
                        for (int i = 0; i < r; ++i)
                            for (int j = 0; j < c; ++j)
                                p.grad[i * c + j] +=
                                    self.grad[i * out_cols + off + j];
                    }
                }
                off += axis == 0 ? r : c;
            }
        });
}

// Row-wise softmax of a 2-D tensor.
inline Tensor softmax_rows(const Tensor& x) {
    check(x.shape().size() == 2, "softmax: needs 2-D input, got ",
          shape_str(x.shape()));
    const int m = x.shape()[0], n = x.shape()[1];
    std::vector<double> y(x.value().size());
    for (int i = 0; i < m; ++i) {
        const double* row = x.value().data() + i * n;
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int j = 0; j < n; ++j) {
            y[i * n + j] = std::exp(row[j] - mx);
            denom += y[i * n + j];
        }
        for (int j = 0; j < n; ++j) y[i * n + j] /= denom;
    }
    return detail::make_op("softmax", x.shape(), std::move(y), {x.node()},
                           [m, n](Node& self) {
                               Node& p = *self.parents[0];
                               if (!p.requires_grad) return;
                               p.ensure_grad();
                               for (int i = 0; i < m; ++i) {
                                   const double* Y = self.value.data() + i * n;
                                   const double* G = self.grad.data() + i * n;
                                   double dot = 0.0;
                                   for (int j = 0; j < n; ++j) dot += G[j] * Y[j];
                                   for (int j = 0; j < n; ++j)
                                       p.grad[i * n + j] += Y[j] * (G[j] - dot);
                               }
                           });
}

// Row-wise layer normalization: y = (x - mean) / sqrt(var + eps) * gamma + beta.
inline Tensor layernorm_rows(const Tensor& x, const Tensor& gamma,
                             const Tensor& beta, double eps = 1e-5) {
    check(x.shape().size() == 2, "layernorm: needs 2-D input");
    const int m = x.shape()[0], n = x.shape()[1];
    check(gamma.shape() == Shape({1, n}) && beta.shape() == Shape({1, n}),
          "layernorm: gamma/beta must be [1x", n, "]");
    std::vector<double> y(x.value().size());
    std::vector<double> xhat(x.value().size());
    std::vector<double> inv_std(m);
    for (int i = 0; i < m; ++i) {
        const double* row = x.value().data() + i * n;
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += row[j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= n;
        double inv = 1.0 / std::sqrt(var + eps);
        inv_std[i] = inv;
        for (int j = 0; j < n; ++j) {
            double xh = (row[j] - mean) * inv;
            xhat[i * n + j] = xh;
            y[i * n + j] = xh * gamma.value()[j] + beta.value()[j];
        }
    }
    return detail::make_op(
        "layernorm", x.shape(), std::move(y),
        {x.node(), gamma.node(), beta.node()},
        [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
            Node& px = *self.parents[0];
            Node& pg = *self.parents[1];
            Node& pb = *self.parents[2];
            if (pg.requires_grad) pg.ensure_grad();
            if (pb.requires_grad) pb.ensure_grad();
            if (px.requires_grad) px.ensure_grad();
            for (int i = 0; i < m; ++i) {
                const double* G = self.grad.data() + i * n;
                const double* XH = xhat.data() + i * n;
                if (pg.requires_grad)
                    for (int j = 0; j < n; ++j) pg.grad[j] += G[j] * XH[j];
                if (pb.requires_grad)
                    for (int j = 0; j < n; ++j) pb.grad[j] += G[j];
                if (px.requires_grad) {
                    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                    for (int j = 0; j < n; ++j) {
                        double dxh = G[j] * pg.value[j];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * XH[j];
                    }
                    mean_dxhat /= n;
                    mean_dxhat_xhat /= n;
                    for (int j = 0; j < n; ++j) {
                        double dxh = G[j] * pg.value[j];
                        px.grad[i * n + j] +=
                            inv_std[i] * (dxh - mean_dxhat - XH[j] * mean_dxhat_xhat);
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// image ops (3-D tensors, CxHxW)
// ---------------------------------------------------------------------------

// Direct convolution. x: [Cin,H,W], k: [Cout,Cin,kh,kw], b: [Cout].
inline Tensor conv2d(const Tensor& x, const Tensor& k, const Tensor& b,
                     int stride, int pad) {
    check(x.shape().size() == 3, "conv2d: input must be CxHxW, got ",
          shape_str(x.shape()));
    check(k.shape().size() == 4, "conv2d: kernel must be FxCxKhxKw, got ",
          shape_str(k.shape()));
    check(stride >= 1, "conv2d: stride must be >= 1");
    check(pad >= 0, "conv2d: pad must be >= 0");
    const int ci = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    const int f = k.shape()[0], kh = k.shape()[2], kw = k.shape()[3];
    check(k.shape()[1] == ci, "conv2d: kernel channels ", k.shape()[1],
          " do not match input channels ", ci);
    check(b.shape() == Shape({f}), "conv2d: bias must be [", f, "], got ",
          shape_str(b.shape()));
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (w + 2 * pad - kw) / stride + 1;
    check(oh >= 1 && ow >= 1, "conv2d: kernel ", kh, "x", kw,
          " too large for input ", h, "x", w, " with pad ", pad);
    std::vector<double> y(static_cast<std::size_t>(f) * oh * ow);
    const double* X = x.value().data();
    const double* K = k.value().data();
    for (int fo = 0; fo < f; ++fo) {
        double bias = b.value()[fo];
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = bias;
                for (int c = 0; c < ci; ++c)
                    for (int ky = 0; ky < kh; ++ky) {
                        int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= w) continue;
                            acc += X[(c * h + iy) * w + ix] *
                                   K[((fo * ci + c) * kh + ky) * kw + kx];
                        }
                    }
                y[(fo * oh + oy) * ow + ox] = acc;
            }
    }
    return detail::make_op(
        "conv2d", {f, oh, ow}, std::move(y), {x.node(), k.node(), b.node()},
        [ci, h, w, f, kh, kw, oh, ow, stride, pad](Node& self) {
            Node& px = *self.parents[0];
            Node& pk = *self.parents[1];
            Node& pb = *self.parents[2];
            const double* G = self.grad.data();
            if (px.requires_grad) px.ensure_grad();
            if (pk.requires_grad) pk.ensure_grad();
            if (pb.requires_grad) pb.ensure_grad();
            for (int fo = 0; fo < f; ++fo)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        double g = G[(fo * oh + oy) * ow + ox];
                        if (pb.requires_grad) pb.grad[fo] += g;
                        for (int c = 0; c < ci; ++c)
                            for (int ky = 0; ky < kh; ++ky) {
                                int iy = oy * stride + ky - pad;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < kw; ++kx) {
                                    int ix = ox * stride + kx - pad;
                                    if (ix < 0 || ix >= w) continue;
                                    std::size_t xi = (c * h + iy) * w + ix;
                                    std::size_t kidx =
                                        ((fo * ci + c) * kh + ky) * kw + kx;
                                    if (px.requires_grad)
                                        px.grad[xi] += g * pk.value[kidx];
                                    if (pk.requires_grad)
                                        pk.grad[kidx] += g * px.value[xi];
                                }
                            }
                    }
        });
}

// Adaptive max pooling to a fixed output grid. Bin j of n over extent L
// covers input indices [floor(j*L/n), ceil((j+1)*L/n)).
inline Tensor adaptive_max_pool2d(const Tensor& x, int oh, int ow) {
    check(x.shape().size() == 3, "adaptive_max_pool2d: input must be CxHxW, got ",
          shape_str(x.shape()));
    check(oh >= 1 && ow >= 1, "adaptive_max_pool2d: output grid must be >= 1x1");
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    check(oh <= h && ow <= w, "adaptive_max_pool2d: output grid ", oh, "x", ow,
          " larger than input ", h, "x", w);
    std::vector<double> y(static_cast<std::size_t>(c) * oh * ow);
    std::vector<std::int32_t> argmax(y.size());
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < oh; ++oy) {
            int y0 = (oy * h) / oh;
            int y1 = ((oy + 1) * h + oh - 1) / oh;
            for (int ox = 0; ox < ow; ++ox) {
                int x0 = (ox * w) / ow;
                int x1 = ((ox + 1) * w + ow - 1) / ow;
                double best = -std::numeric_limits<double>::infinity();
                std::int32_t best_idx = -1;
                for (int iy = y0; iy < y1; ++iy)
                    for (int ix = x0; ix < x1; ++ix) {
                        double v = x.value()[(ch * h + iy) * w + ix];
                        if (v > best) {
                            best = v;
                            best_idx = static_cast<std::int32_t>((ch * h + iy) * w + ix);
                        }
                    }
                y[(ch * oh + oy) * ow + ox] = best;
                argmax[(ch * oh + oy) * ow + ox] = best_idx;
            }
        }
    return detail::make_op(
        "adaptive_max_pool2d", {c, oh, ow}, std::move(y), {x.node()},
        [argmax = std::move(argmax)](Node& self) {
            Node& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                p.grad[argmax[i]] += self.grad[i];
        });
}

// ---------------------------------------------------------------------------
// dropout, reductions, loss
// ---------------------------------------------------------------------------

// Inverted dropout: train-time scaling by 1/(1-rate); eval is the identity.
inline Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng) {
    check(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1), got ", rate);
    if (!train || rate == 0.0) return x;
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<std::uint8_t> mask(x.value().size());
    std::vector<double> y(x.value().size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        mask[i] = rng.uniform01() >= rate ? 1 : 0;
        y[i] = mask[i] ? x.value()[i] * keep_scale : 0.0;
    }
    return detail::make_op("dropout", x.shape(), std::move(y), {x.node()},
                           [mask = std::move(mask), keep_scale](Node& self) {
                               Node& p = *self.parents[0];
                               if (!p.requires_grad) return;
                               p.ensure_grad();
                               for (std::size_t i = 0; i < self.grad.size(); ++i)
                                   if (mask[i]) p.grad[i] += self.grad[i] * keep_scale;
                           });
}

inline Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (double v : x.value()) s += v;
    return detail::make_op("sum", {1}, {s}, {x.node()}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < p.grad.size(); ++i)
            p.grad[i] += self.grad[0];
    });
}

// Mean absolute error between two same-shape tensors; scalar output.
inline Tensor mean_abs_error(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "mean_abs_error: shape mismatch ",
          shape_str(a.shape()), " vs ", shape_str(b.shape()));
    const std::size_t n = a.value().size();
    check(n >= 1, "mean_abs_error: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::abs(a.value()[i] - b.value()[i]);
    s /= static_cast<double>(n);
    return detail::make_op(
        "mean_abs_error", {1}, {s}, {a.node(), b.node()}, [n](Node& self) {
            Node& pa = *self.parents[0];
            Node& pb = *self.parents[1];
            const double g = self.grad[0] / static_cast<double>(n);
            if (pa.requires_grad) pa.ensure_grad();
            if (pb.requires_grad) pb.ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                double d = pa.value[i] - pb.value[i];
                double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                if (pa.requires_grad) pa.grad[i] += g * sgn;
                if (pb.requires_grad) pb.grad[i] -= g * sgn;
            }
        });
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Gradients accumulate additively into
// every reachable tensor that requires grad. The consumed part of the record
// is released afterwards; a second sweep needs a fresh forward pass.
inline void backward(const Tensor& loss) {
    check(loss.defined(), "backward: undefined tensor");
    check(loss.size() == 1, "backward: loss must be scalar, got ",
          shape_str(loss.shape()));
    std::shared_ptr<Node> root = loss.node();
    check(!root->released,
          "backward: computation record already consumed; run a new forward pass");
    check(root->requires_grad,
          "backward: loss does not depend on any tracked parameter");

    // Iterative post-order DFS; topo ends at the root, then walk it backwards.
    // The list holds shared ownership: releasing a node's parent links below
    // must not free nodes that are still waiting for their own sweep.
    std::vector<std::shared_ptr<Node>> topo;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
    visited.insert(root.get());
    stack.emplace_back(root, 0);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            std::shared_ptr<Node> next = node->parents[idx++];
            if (next->requires_grad && !visited.count(next.get())) {
                visited.insert(next.get());
                stack.emplace_back(std::move(next), 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* node = it->get();
        if (!node->backward_fn) continue; // leaf: keeps its gradient
        node->backward_fn(*node);
        node->released = true;
        node->parents.clear();
        node->backward_fn = nullptr;
    }
}

} // namespace progressd::nn
