#ifndef PFALAB_OPS_HPP
#define PFALAB_OPS_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "pfalab/tensor.hpp"

namespace pfalab {

namespace detail {

inline void accumulate(Node* p, const std::vector<double>& g) {
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
}

}  // namespace detail

// y = xW + b
inline Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b) {
    if (x.shape().size() != 2 || W.shape().size() != 2 || b.shape().size() != 1)
        throw DimensionError("affine: expects x[n,din], W[din,dout], b[dout]");
    const std::size_t n = x.shape()[0], din = x.shape()[1];
    const std::size_t dout = W.shape()[1];
    if (W.shape()[0] != din || b.shape()[0] != dout)
        throw DimensionError("affine: shapes do not conform");

    auto node = detail::make_result({n, dout}, {x, W, b}, "affine");
    const auto& xv = x.values();
    const auto& wv = W.values();
    const auto& bv = b.values();
    auto& yv = node->value;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dout; ++j) yv[i * dout + j] = bv[j];
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < din; ++k) {
            const double xik = xv[i * din + k];
            const double* wrow = wv.data() + k * dout;
            double* yrow = yv.data() + i * dout;
            for (std::size_t j = 0; j < dout; ++j) yrow[j] += xik * wrow[j];
        }
    }
    if (node->requires_grad) {
        auto xn = x.node();
        auto wn = W.node();
        auto bn = b.node();
        node->backward = [n, din, dout, xn, wn, bn](detail::Node& self) {
            const auto& gy = self.grad;
            if (xn->requires_grad) {
                xn->ensure_grad();
                const auto& wv2 = wn->value;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t k = 0; k < din; ++k) {
                        double acc = 0.0;
                        const double* wrow = wv2.data() + k * dout;
                        const double* grow = gy.data() + i * dout;
                        for (std::size_t j = 0; j < dout; ++j) acc += grow[j] * wrow[j];
                        xn->grad[i * din + k] += acc;
                    }
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                const auto& xv2 = xn->value;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t k = 0; k < din; ++k) {
                        const double xik = xv2[i * din + k];
                        const double* grow = gy.data() + i * dout;
                        double* wg = wn->grad.data() + k * dout;
                        for (std::size_t j = 0; j < dout; ++j) wg[j] += xik * grow[j];
                    }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < dout; ++j) bn->grad[j] += gy[i * dout + j];
            }
        };
    }
    return Tensor::wrap(node);
}

// C = A * B^T, A[n,d], B[m,d] -> [n,m]
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[1])
        throw DimensionError("matmul_nt: inner dimensions do not match");
    const std::size_t n = a.shape()[0], d = a.shape()[1], m = b.shape()[0];
    auto node = detail::make_result({n, m}, {a, b}, "matmul_nt");
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            const double* arow = av.data() + i * d;
            const double* brow = bv.data() + j * d;
            for (std::size_t k = 0; k < d; ++k) acc += arow[k] * brow[k];
            node->value[i * m + j] = acc;
        }
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        node->backward = [n, d, m, an, bn](detail::Node& self) {
            const auto& gy = self.grad;
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) {
                        const double g = gy[i * m + j];
                        const double* brow = bn->value.data() + j * d;
                        double* ag = an->grad.data() + i * d;
                        for (std::size_t k = 0; k < d; ++k) ag[k] += g * brow[k];
                    }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) {
                        const double g = gy[i * m + j];
                        const double* arow = an->value.data() + i * d;
                        double* bg = bn->grad.data() + j * d;
                        for (std::size_t k = 0; k < d; ++k) bg[k] += g * arow[k];
                    }
            }
        };
    }
    return Tensor::wrap(node);
}

// Same data, new shape.
inline Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size()) throw DimensionError("reshape: element count mismatch");
    auto node = detail::make_result(std::move(shape), {x}, "reshape");
    node->value = x.values();
    if (node->requires_grad) {
        auto xn = x.node();
        node->backward = [xn](detail::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
        };
    }
    return Tensor::wrap(node);
}

// Elementwise max(0, x); subgradient at 0 is 0.
inline Tensor relu(const Tensor& x) {
    auto node = detail::make_result(x.shape(), {x}, "relu");
    const auto& xv = x.values();
    for (std::size_t i = 0; i < xv.size(); ++i) node->value[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    if (node->requires_grad) {
        auto xn = x.node();
        node->backward = [xn](detail::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                if (xn->value[i] > 0.0) xn->grad[i] += self.grad[i];
        };
    }
    return Tensor::wrap(node);
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw DimensionError("add: shape mismatch");
    auto node = detail::make_result(a.shape(), {a, b}, "add");
    for (std::size_t i = 0; i < node->value.size(); ++i)
        node->value[i] = a.values()[i] + b.values()[i];
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        node->backward = [an, bn](detail::Node& self) {
            detail::accumulate(an, self.grad);
            detail::accumulate(bn, self.grad);
        };
    }
    return Tensor::wrap(node);
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw DimensionError("mul: shape mismatch");
    auto node = detail::make_result(a.shape(), {a, b}, "mul");
    for (std::size_t i = 0; i < node->value.size(); ++i)
        node->value[i] = a.values()[i] * b.values()[i];
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        node->backward = [an, bn](detail::Node& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    an->grad[i] += self.grad[i] * bn->value[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    bn->grad[i] += self.grad[i] * an->value[i];
            }
        };
    }
    return Tensor::wrap(node);
}

inline Tensor scale(const Tensor& x, double s) {
    auto node = detail::make_result(x.shape(), {x}, "scale");
    for (std::size_t i = 0; i < node->value.size(); ++i) node->value[i] = s * x.values()[i];
    if (node->requires_grad) {
        auto xn = x.node();
        node->backward = [xn, s](detail::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += s * self.grad[i];
        };
    }
    return Tensor::wrap(node);
}

// Sum of all elements.
inline Tensor sum(const Tensor& x) {
    auto node = detail::make_result({1}, {x}, "sum");
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    node->value[0] = acc;
    if (node->requires_grad) {
        auto xn = x.node();
        node->backward = [xn](detail::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += self.grad[0];
        };
    }
    return Tensor::wrap(node);
}

// sum_i w_i * x_i with constant weights.
inline Tensor weighted_sum(const Tensor& x, std::vector<double> w) {
    if (x.size() != w.size()) throw DimensionError("weighted_sum: weight count mismatch");
    auto node = detail::make_result({1}, {x}, "weighted_sum");
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * x.values()[i];
    node->value[0] = acc;
    if (node->requires_grad) {
        auto xn = x.node();
        node->backward = [xn, w = std::move(w)](detail::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < w.size(); ++i) xn->grad[i] += w[i] * self.grad[0];
        };
    }
    return Tensor::wrap(node);
}

namespace detail {

// Row-wise softmax with max-subtraction; plain values, no graph.
inline std::vector<double> softmax_rows(const std::vector<double>& logits, std::size_t n,
                                        std::size_t c) {
    std::vector<double> out(n * c);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = logits.data() + i * c;
        double mx = row[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] = std::exp(row[j] - mx);
            z += out[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
    }
    return out;
}

}  // namespace detail

// Per-row -log softmax(logits)[target], shape [n].
inline Tensor softmax_cross_entropy_per_row(const Tensor& logits,
                                            const std::vector<int>& targets) {
    if (logits.shape().size() != 2) throw DimensionError("cross_entropy: logits must be 2-d");
    const std::size_t n = logits.shape()[0], c = logits.shape()[1];
    if (targets.size() != n) throw DimensionError("cross_entropy: target count mismatch");
    for (int t : targets)
        if (t < 0 || static_cast<std::size_t>(t) >= c)
            throw std::out_of_range("cross_entropy: target class out of range");

    auto node = detail::make_result({n}, {logits}, "softmax_ce_row");
    auto probs = detail::softmax_rows(logits.values(), n, c);
    const auto& lv = logits.values();
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = lv.data() + i * c;
        double mx = row[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
        node->value[i] = std::log(z) - (row[targets[i]] - mx);
    }
    if (node->requires_grad) {
        auto ln = logits.node();
        node->backward = [ln, n, c, probs = std::move(probs), targets](detail::Node& self) {
            ln->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const double g = self.grad[i];
                for (std::size_t j = 0; j < c; ++j)
                    ln->grad[i * c + j] += g * probs[i * c + j];
                ln->grad[i * c + targets[i]] -= g;
            }
        };
    }
    return Tensor::wrap(node);
}

// Mean over rows of -log softmax(logits)[target].
inline Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
    Tensor per_row = softmax_cross_entropy_per_row(logits, targets);
    return scale(sum(per_row), 1.0 / static_cast<double>(targets.size()));
}

// v / ||v|| for a 1-d tensor; errors on near-zero norm.
inline Tensor l2_normalize(const Tensor& v) {
    constexpr double kEps = 1e-12;
    double nrm = 0.0;
    for (double x : v.values()) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm <= kEps) throw DegenerateVectorError("l2_normalize: near-zero norm");
    auto node = detail::make_result(v.shape(), {v}, "l2_normalize");
    for (std::size_t i = 0; i < v.size(); ++i) node->value[i] = v.values()[i] / nrm;
    if (node->requires_grad) {
        auto vn = v.node();
        node->backward = [vn, nrm](detail::Node& self) {
            vn->ensure_grad();
            const std::size_t d = self.value.size();
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += self.grad[i] * self.value[i];
            for (std::size_t i = 0; i < d; ++i)
                vn->grad[i] += (self.grad[i] - dot * self.value[i]) / nrm;
        };
    }
    return Tensor::wrap(node);
}

// Row-wise l2 normalization of a 2-d tensor.
inline Tensor l2_normalize_rows(const Tensor& x) {
    constexpr double kEps = 1e-12;
    if (x.shape().size() != 2) throw DimensionError("l2_normalize_rows: expects 2-d");
    const std::size_t n = x.shape()[0], d = x.shape()[1];
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        const double* row = x.values().data() + i * d;
        for (std::size_t j = 0; j < d; ++j) s += row[j] * row[j];
        norms[i] = std::sqrt(s);
        if (norms[i] <= kEps) throw DegenerateVectorError("l2_normalize_rows: near-zero row");
    }
    auto node = detail::make_result(x.shape(), {x}, "l2_normalize_rows");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            node->value[i * d + j] = x.values()[i * d + j] / norms[i];
    if (node->requires_grad) {
        auto xn = x.node();
        node->backward = [xn, n, d, norms = std::move(norms)](detail::Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const double* y = self.value.data() + i * d;
                const double* g = self.grad.data() + i * d;
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) dot += g[j] * y[j];
                double* xg = xn->grad.data() + i * d;
                for (std::size_t j = 0; j < d; ++j) xg[j] += (g[j] - dot * y[j]) / norms[i];
            }
        };
    }
    return Tensor::wrap(node);
}

// a.b / (||a|| ||b||), differentiable w.r.t. both vectors.
inline Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape() || a.shape().size() != 1)
        throw DimensionError("cosine_similarity: expects two equal 1-d tensors");
    Tensor na = l2_normalize(a);
    Tensor nb = l2_normalize(b);
    auto node = detail::make_result({1}, {na, nb}, "cosine");
    double dot = 0.0;
    for (std::size_t i = 0; i < na.size(); ++i) dot += na.values()[i] * nb.values()[i];
    node->value[0] = dot;
    if (node->requires_grad) {
        auto an = na.node();
        auto bn = nb.node();
        node->backward = [an, bn](detail::Node& self) {
            const double g = self.grad[0];
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < an->value.size(); ++i)
                    an->grad[i] += g * bn->value[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < bn->value.size(); ++i)
                    bn->grad[i] += g * an->value[i];
            }
        };
    }
    return Tensor::wrap(node);
}

}  // namespace pfalab

#endif
