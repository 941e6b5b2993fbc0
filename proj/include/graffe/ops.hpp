#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <vector>

#include "graffe/rng.hpp"
#include "graffe/tensor.hpp"

namespace graffe {

namespace detail {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapM = Eigen::Map<MatR<T>>;
template <class T>
using MapC = Eigen::Map<const MatR<T>>;

template <class T>
MapC<T> as_mat(const std::vector<T>& v, std::int64_t r, std::int64_t c) {
    return MapC<T>(v.data(), r, c);
}
template <class T>
MapM<T> as_mat(std::vector<T>& v, std::int64_t r, std::int64_t c) {
    return MapM<T>(v.data(), r, c);
}

template <class T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                      std::initializer_list<Tensor<T>> parents) {
    Tensor<T> out = Tensor<T>::from_values(std::move(shape), std::move(values));
    out.node()->op = op;
    if (!grad_mode()) return out;
    bool any_tracked = false;
    for (const auto& p : parents)
        if (p.requires_grad()) any_tracked = true;
    if (any_tracked) {
        out.node()->requires_grad = true;
        for (const auto& p : parents) out.node()->parents.push_back(p.node());
    }
    return out;
}

template <class T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// element-wise arithmetic
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape("add", a, b);
    std::vector<T> v(a.values());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += b.values()[i];
    auto out = detail::make_result("add", a.shape(), std::move(v), {a, b});
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node();
        out.node()->backward_fn = [an, bn](const std::vector<T>& g) {
            if (an->requires_grad) {
                auto& ga = an->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (bn->requires_grad) {
                auto& gb = bn->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape("sub", a, b);
    std::vector<T> v(a.values());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= b.values()[i];
    auto out = detail::make_result("sub", a.shape(), std::move(v), {a, b});
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node();
        out.node()->backward_fn = [an, bn](const std::vector<T>& g) {
            if (an->requires_grad) {
                auto& ga = an->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (bn->requires_grad) {
                auto& gb = bn->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape("mul", a, b);
    std::vector<T> v(a.values());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= b.values()[i];
    auto out = detail::make_result("mul", a.shape(), std::move(v), {a, b});
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node();
        out.node()->backward_fn = [an, bn](const std::vector<T>& g) {
            if (an->requires_grad) {
                auto& ga = an->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->value[i];
            }
            if (bn->requires_grad) {
                auto& gb = bn->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * an->value[i];
            }
        };
    }
    return out;
}

/// Multiply by a 1-element (typically learnable) tensor.
template <class T>
Tensor<T> scale_t(const Tensor<T>& x, const Tensor<T>& s) {
    if (s.size() != 1) throw ShapeError("scale_t", "scale must be a single element");
    const T c = s.values()[0];
    std::vector<T> v(x.values());
    for (auto& e : v) e *= c;
    auto out = detail::make_result("scale_t", x.shape(), std::move(v), {x, s});
    if (out.requires_grad()) {
        auto xn = x.node(), sn = s.node();
        out.node()->backward_fn = [xn, sn, c](const std::vector<T>& g) {
            if (xn->requires_grad) {
                auto& gx = xn->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * c;
            }
            if (sn->requires_grad) {
                auto& gs = sn->ensure_grad();
                T acc = T(0);
                for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xn->value[i];
                gs[0] += acc;
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    std::vector<T> v(a.values());
    for (auto& x : v) x *= c;
    auto out = detail::make_result("scale", a.shape(), std::move(v), {a});
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backward_fn = [an, c](const std::vector<T>& g) {
            auto& ga = an->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
        };
    }
    return out;
}

/// x (n x d) plus a bias row of length d, broadcast over rows.
template <class T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& b) {
    const std::int64_t n = x.rows(), d = x.cols();
    if (b.size() != d) throw ShapeError("add_bias", x.shape(), b.shape());
    std::vector<T> v(x.values());
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < d; ++j) v[static_cast<std::size_t>(i * d + j)] += b.values()[static_cast<std::size_t>(j)];
    auto out = detail::make_result("add_bias", x.shape(), std::move(v), {x, b});
    if (out.requires_grad()) {
        auto xn = x.node(), bn = b.node();
        out.node()->backward_fn = [xn, bn, n, d](const std::vector<T>& g) {
            if (xn->requires_grad) {
                auto& gx = xn->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            }
            if (bn->requires_grad) {
                auto& gb = bn->ensure_grad();
                for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t j = 0; j < d; ++j) gb[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i * d + j)];
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// matrix multiply
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows())
        throw ShapeError("matmul", a.shape(), b.shape());
    const std::int64_t n = a.rows(), k = a.cols(), m = b.cols();
    std::vector<T> v(static_cast<std::size_t>(n * m));
    detail::as_mat(v, n, m).noalias() = detail::as_mat(a.values(), n, k) * detail::as_mat(b.values(), k, m);
    auto out = detail::make_result("matmul", {n, m}, std::move(v), {a, b});
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node();
        out.node()->backward_fn = [an, bn, n, k, m](const std::vector<T>& g) {
            auto gm = detail::as_mat(g, n, m);
            if (an->requires_grad) {
                an->ensure_grad();
                detail::as_mat(an->grad, n, k).noalias() += gm * detail::as_mat(bn->value, k, m).transpose();
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                detail::as_mat(bn->grad, k, m).noalias() += detail::as_mat(an->value, n, k).transpose() * gm;
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// unary maps
// ---------------------------------------------------------------------------

namespace detail {

template <class T, class FwdFn, class BwdFn>
Tensor<T> unary_op(const char* name, const Tensor<T>& x, FwdFn fwd, BwdFn dfdx_from_x_and_y) {
    std::vector<T> v(x.values());
    for (auto& e : v) e = fwd(e);
    auto out = make_result(name, x.shape(), std::move(v), {x});
    if (out.requires_grad()) {
        auto xn = x.node();
        auto* on = out.node().get();
        out.node()->backward_fn = [xn, on, dfdx_from_x_and_y](const std::vector<T>& g) {
            auto& gx = xn->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i)
                gx[i] += g[i] * dfdx_from_x_and_y(xn->value[i], on->value[i]);
        };
    }
    return out;
}

}  // namespace detail

template <class T>
Tensor<T> exp_op(const Tensor<T>& x) {
    return detail::unary_op("exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
Tensor<T> log_op(const Tensor<T>& x) {
    return detail::unary_op("log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return detail::unary_op(
        "sigmoid", x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
        [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> tanh_op(const Tensor<T>& x) {
    return detail::unary_op("tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> silu(const Tensor<T>& x) {
    return detail::unary_op(
        "silu", x,
        [](T v) { return v / (T(1) + std::exp(-v)); },
        [](T v, T) {
            T s = T(1) / (T(1) + std::exp(-v));
            return s * (T(1) + v * (T(1) - s));
        });
}

template <class T>
Tensor<T> elu(const Tensor<T>& x) {
    return detail::unary_op(
        "elu", x, [](T v) { return v > T(0) ? v : std::expm1(v); },
        [](T v, T y) { return v > T(0) ? T(1) : y + T(1); });
}

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
    return detail::unary_op(
        "leaky_relu", x, [slope](T v) { return v > T(0) ? v : slope * v; },
        [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

/// PReLU with a single learnable slope (1-element parameter).
template <class T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope) {
    if (slope.size() != 1) throw ShapeError("prelu", "slope must be a single element");
    const T a = slope.values()[0];
    std::vector<T> v(x.values());
    for (auto& e : v) e = e > T(0) ? e : a * e;
    auto out = detail::make_result("prelu", x.shape(), std::move(v), {x, slope});
    if (out.requires_grad()) {
        auto xn = x.node(), sn = slope.node();
        out.node()->backward_fn = [xn, sn, a](const std::vector<T>& g) {
            if (xn->requires_grad) {
                auto& gx = xn->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i)
                    gx[i] += g[i] * (xn->value[i] > T(0) ? T(1) : a);
            }
            if (sn->requires_grad) {
                auto& gs = sn->ensure_grad();
                T acc = T(0);
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (xn->value[i] <= T(0)) acc += g[i] * xn->value[i];
                gs[0] += acc;
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

inline constexpr double kLayerNormEps = 1e-5;

/// Row-wise layer normalization without affine parameters. Constant rows map
/// to zeros through the epsilon guard on the variance.
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, T eps = T(kLayerNormEps)) {
    const std::int64_t n = x.rows(), d = x.cols();
    std::vector<T> v(static_cast<std::size_t>(n * d));
    std::vector<T> inv_std(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const T* row = x.data() + i * d;
        T mean = T(0);
        for (std::int64_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<T>(d);
        T var = T(0);
        for (std::int64_t j = 0; j < d; ++j) {
            T c = row[j] - mean;
            var += c * c;
        }
        var /= static_cast<T>(d);
        T is = T(1) / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(i)] = is;
        for (std::int64_t j = 0; j < d; ++j) v[static_cast<std::size_t>(i * d + j)] = (row[j] - mean) * is;
    }
    auto out = detail::make_result("layer_norm", x.shape(), std::move(v), {x});
    if (out.requires_grad()) {
        auto xn = x.node();
        auto* on = out.node().get();
        out.node()->backward_fn = [xn, on, inv_std, n, d](const std::vector<T>& g) {
            auto& gx = xn->ensure_grad();
            for (std::int64_t i = 0; i < n; ++i) {
                const T* y = on->value.data() + i * d;
                const T* gr = g.data() + i * d;
                T mean_g = T(0), mean_gy = T(0);
                for (std::int64_t j = 0; j < d; ++j) {
                    mean_g += gr[j];
                    mean_gy += gr[j] * y[j];
                }
                mean_g /= static_cast<T>(d);
                mean_gy /= static_cast<T>(d);
                const T is = inv_std[static_cast<std::size_t>(i)];
                for (std::int64_t j = 0; j < d; ++j)
                    gx[static_cast<std::size_t>(i * d + j)] += is * (gr[j] - mean_g - y[j] * mean_gy);
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// segment operations over CSR-style offsets
// ---------------------------------------------------------------------------

/// Softmax within each [offsets[s], offsets[s+1]) row range, independently
/// per column. A one-element segment maps to exactly 1.
template <class T>
Tensor<T> segment_softmax(const Tensor<T>& x, std::vector<std::int64_t> offsets) {
    const std::int64_t e = x.rows(), c = x.cols();
    if (offsets.empty() || offsets.back() != e)
        throw ShapeError("segment_softmax", "offsets do not cover input rows");
    std::vector<T> v(x.values());
    const std::int64_t s_count = static_cast<std::int64_t>(offsets.size()) - 1;
    for (std::int64_t s = 0; s < s_count; ++s) {
        for (std::int64_t j = 0; j < c; ++j) {
            T mx = -std::numeric_limits<T>::infinity();
            for (std::int64_t r = offsets[s]; r < offsets[s + 1]; ++r)
                mx = std::max(mx, x.values()[static_cast<std::size_t>(r * c + j)]);
            T z = T(0);
            for (std::int64_t r = offsets[s]; r < offsets[s + 1]; ++r) {
                T ex = std::exp(x.values()[static_cast<std::size_t>(r * c + j)] - mx);
                v[static_cast<std::size_t>(r * c + j)] = ex;
                z += ex;
            }
            for (std::int64_t r = offsets[s]; r < offsets[s + 1]; ++r) v[static_cast<std::size_t>(r * c + j)] /= z;
        }
    }
    auto out = detail::make_result("segment_softmax", x.shape(), std::move(v), {x});
    if (out.requires_grad()) {
        auto xn = x.node();
        auto* on = out.node().get();
        out.node()->backward_fn = [xn, on, offsets, c](const std::vector<T>& g) {
            auto& gx = xn->ensure_grad();
            const std::int64_t s_count = static_cast<std::int64_t>(offsets.size()) - 1;
            for (std::int64_t s = 0; s < s_count; ++s) {
                for (std::int64_t j = 0; j < c; ++j) {
                    T dot = T(0);
                    for (std::int64_t r = offsets[s]; r < offsets[s + 1]; ++r) {
                        std::size_t idx = static_cast<std::size_t>(r * c + j);
                        dot += g[idx] * on->value[idx];
                    }
                    for (std::int64_t r = offsets[s]; r < offsets[s + 1]; ++r) {
                        std::size_t idx = static_cast<std::size_t>(r * c + j);
                        gx[idx] += on->value[idx] * (g[idx] - dot);
                    }
                }
            }
        };
    }
    return out;
}

/// out[i] = x[index[i]].
template <class T>
Tensor<T> gather_rows(const Tensor<T>& x, std::vector<std::int64_t> index) {
    const std::int64_t d = x.cols();
    const std::int64_t m = static_cast<std::int64_t>(index.size());
    std::vector<T> v(static_cast<std::size_t>(m * d));
    for (std::int64_t i = 0; i < m; ++i) {
        const T* src = x.data() + index[static_cast<std::size_t>(i)] * d;
        std::copy(src, src + d, v.begin() + i * d);
    }
    auto out = detail::make_result("gather_rows", {m, d}, std::move(v), {x});
    if (out.requires_grad()) {
        auto xn = x.node();
        out.node()->backward_fn = [xn, index, m, d](const std::vector<T>& g) {
            auto& gx = xn->ensure_grad();
            for (std::int64_t i = 0; i < m; ++i) {
                T* dst = gx.data() + index[static_cast<std::size_t>(i)] * d;
                const T* src = g.data() + i * d;
                for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
            }
        };
    }
    return out;
}

/// out[v] = sum of x[u] over the CSR neighbor list of v.
template <class T>
Tensor<T> neighbor_sum(const Tensor<T>& x, std::vector<std::int64_t> offsets,
                       std::vector<std::int64_t> cols) {
    const std::int64_t n = x.rows(), d = x.cols();
    if (static_cast<std::int64_t>(offsets.size()) != n + 1)
        throw ShapeError("neighbor_sum", "offsets length must be n+1");
    std::vector<T> v(static_cast<std::size_t>(n * d), T(0));
    for (std::int64_t i = 0; i < n; ++i) {
        T* dst = v.data() + i * d;
        for (std::int64_t e = offsets[static_cast<std::size_t>(i)]; e < offsets[static_cast<std::size_t>(i + 1)]; ++e) {
            const T* src = x.data() + cols[static_cast<std::size_t>(e)] * d;
            for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    }
    auto out = detail::make_result("neighbor_sum", x.shape(), std::move(v), {x});
    if (out.requires_grad()) {
        auto xn = x.node();
        out.node()->backward_fn = [xn, offsets, cols, n, d](const std::vector<T>& g) {
            auto& gx = xn->ensure_grad();
            for (std::int64_t i = 0; i < n; ++i) {
                const T* src = g.data() + i * d;
                for (std::int64_t e = offsets[static_cast<std::size_t>(i)]; e < offsets[static_cast<std::size_t>(i + 1)]; ++e) {
                    T* dst = gx.data() + cols[static_cast<std::size_t>(e)] * d;
                    for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
                }
            }
        };
    }
    return out;
}

/// out[v] = sum over edges e of segment v of alpha[e] * h[src[e]].
/// alpha is (E x 1); h is (n x d); offsets has n+1 entries.
template <class T>
Tensor<T> segment_weighted_gather_sum(const Tensor<T>& alpha, const Tensor<T>& h,
                                      std::vector<std::int64_t> src,
                                      std::vector<std::int64_t> offsets) {
    const std::int64_t n = static_cast<std::int64_t>(offsets.size()) - 1;
    const std::int64_t d = h.cols();
    if (alpha.size() != static_cast<std::int64_t>(src.size()))
        throw ShapeError("segment_weighted_gather_sum", alpha.shape(), {static_cast<std::int64_t>(src.size()), 1});
    std::vector<T> v(static_cast<std::size_t>(n * d), T(0));
    for (std::int64_t i = 0; i < n; ++i) {
        T* dst = v.data() + i * d;
        for (std::int64_t e = offsets[static_cast<std::size_t>(i)]; e < offsets[static_cast<std::size_t>(i + 1)]; ++e) {
            const T a = alpha.values()[static_cast<std::size_t>(e)];
            const T* row = h.data() + src[static_cast<std::size_t>(e)] * d;
            for (std::int64_t j = 0; j < d; ++j) dst[j] += a * row[j];
        }
    }
    auto out = detail::make_result("segment_weighted_gather_sum", {n, d}, std::move(v), {alpha, h});
    if (out.requires_grad()) {
        auto an = alpha.node(), hn = h.node();
        out.node()->backward_fn = [an, hn, src, offsets, n, d](const std::vector<T>& g) {
            const bool need_a = an->requires_grad, need_h = hn->requires_grad;
            if (need_a) an->ensure_grad();
            if (need_h) hn->ensure_grad();
            for (std::int64_t i = 0; i < n; ++i) {
                const T* go = g.data() + i * d;
                for (std::int64_t e = offsets[static_cast<std::size_t>(i)]; e < offsets[static_cast<std::size_t>(i + 1)]; ++e) {
                    const std::int64_t s = src[static_cast<std::size_t>(e)];
                    if (need_a) {
                        const T* row = hn->value.data() + s * d;
                        T acc = T(0);
                        for (std::int64_t j = 0; j < d; ++j) acc += go[j] * row[j];
                        an->grad[static_cast<std::size_t>(e)] += acc;
                    }
                    if (need_h) {
                        const T a = an->value[static_cast<std::size_t>(e)];
                        T* dst = hn->grad.data() + s * d;
                        for (std::int64_t j = 0; j < d; ++j) dst[j] += a * go[j];
                    }
                }
            }
        };
    }
    return out;
}

/// Per-segment sum or mean of contiguous row blocks (graph readout).
template <class T>
Tensor<T> segment_reduce_rows(const Tensor<T>& x, std::vector<std::int64_t> offsets, bool mean) {
    const std::int64_t b = static_cast<std::int64_t>(offsets.size()) - 1;
    const std::int64_t d = x.cols();
    if (offsets.back() != x.rows()) throw ShapeError("segment_reduce_rows", "offsets do not cover rows");
    std::vector<T> v(static_cast<std::size_t>(b * d), T(0));
    for (std::int64_t s = 0; s < b; ++s) {
        T* dst = v.data() + s * d;
        for (std::int64_t r = offsets[static_cast<std::size_t>(s)]; r < offsets[static_cast<std::size_t>(s + 1)]; ++r) {
            const T* row = x.data() + r * d;
            for (std::int64_t j = 0; j < d; ++j) dst[j] += row[j];
        }
        if (mean) {
            T cnt = static_cast<T>(offsets[static_cast<std::size_t>(s + 1)] - offsets[static_cast<std::size_t>(s)]);
            if (cnt > T(0))
                for (std::int64_t j = 0; j < d; ++j) dst[j] /= cnt;
        }
    }
    auto out = detail::make_result("segment_reduce_rows", {b, d}, std::move(v), {x});
    if (out.requires_grad()) {
        auto xn = x.node();
        out.node()->backward_fn = [xn, offsets, b, d, mean](const std::vector<T>& g) {
            auto& gx = xn->ensure_grad();
            for (std::int64_t s = 0; s < b; ++s) {
                const T* go = g.data() + s * d;
                T w = T(1);
                if (mean) {
                    T cnt = static_cast<T>(offsets[static_cast<std::size_t>(s + 1)] - offsets[static_cast<std::size_t>(s)]);
                    if (cnt > T(0)) w = T(1) / cnt;
                }
                for (std::int64_t r = offsets[static_cast<std::size_t>(s)]; r < offsets[static_cast<std::size_t>(s + 1)]; ++r) {
                    T* dst = gx.data() + r * d;
                    for (std::int64_t j = 0; j < d; ++j) dst[j] += w * go[j];
                }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// shape manipulation
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols", "empty input list");
    const std::int64_t n = parts[0].rows();
    std::int64_t dtot = 0;
    for (const auto& p : parts) {
        if (p.rows() != n) throw ShapeError("concat_cols", parts[0].shape(), p.shape());
        dtot += p.cols();
    }
    std::vector<T> v(static_cast<std::size_t>(n * dtot));
    std::int64_t off = 0;
    for (const auto& p : parts) {
        const std::int64_t d = p.cols();
        for (std::int64_t i = 0; i < n; ++i)
            std::copy(p.data() + i * d, p.data() + (i + 1) * d, v.begin() + i * dtot + off);
        off += d;
    }
    Tensor<T> out = Tensor<T>::from_values({n, dtot}, std::move(v));
    out.node()->op = "concat_cols";
    bool tracked = false;
    for (const auto& p : parts)
        if (p.requires_grad()) tracked = true;
    if (grad_enabled() && tracked) {
        out.node()->requires_grad = true;
        std::vector<std::shared_ptr<detail::Node<T>>> pn;
        std::vector<std::int64_t> widths;
        for (const auto& p : parts) {
            out.node()->parents.push_back(p.node());
            pn.push_back(p.node());
            widths.push_back(p.cols());
        }
        out.node()->backward_fn = [pn, widths, n, dtot](const std::vector<T>& g) {
            std::int64_t off = 0;
            for (std::size_t k = 0; k < pn.size(); ++k) {
                const std::int64_t d = widths[k];
                if (pn[k]->requires_grad) {
                    auto& gp = pn[k]->ensure_grad();
                    for (std::int64_t i = 0; i < n; ++i)
                        for (std::int64_t j = 0; j < d; ++j)
                            gp[static_cast<std::size_t>(i * d + j)] += g[static_cast<std::size_t>(i * dtot + off + j)];
                }
                off += d;
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> slice_cols(const Tensor<T>& x, std::int64_t c0, std::int64_t c1) {
    const std::int64_t n = x.rows(), d = x.cols();
    if (c0 < 0 || c1 > d || c0 >= c1) throw ShapeError("slice_cols", "invalid column range");
    const std::int64_t w = c1 - c0;
    std::vector<T> v(static_cast<std::size_t>(n * w));
    for (std::int64_t i = 0; i < n; ++i)
        std::copy(x.data() + i * d + c0, x.data() + i * d + c1, v.begin() + i * w);
    auto out = detail::make_result("slice_cols", {n, w}, std::move(v), {x});
    if (out.requires_grad()) {
        auto xn = x.node();
        out.node()->backward_fn = [xn, n, d, w, c0](const std::vector<T>& g) {
            auto& gx = xn->ensure_grad();
            for (std::int64_t i = 0; i < n; ++i)
                for (std::int64_t j = 0; j < w; ++j)
                    gx[static_cast<std::size_t>(i * d + c0 + j)] += g[static_cast<std::size_t>(i * w + j)];
        };
    }
    return out;
}

template <class T>
Tensor<T> slice_rows(const Tensor<T>& x, std::int64_t r0, std::int64_t r1) {
    const std::int64_t n = x.rows(), d = x.cols();
    if (r0 < 0 || r1 > n || r0 >= r1) throw ShapeError("slice_rows", "invalid row range");
    const std::int64_t m = r1 - r0;
    std::vector<T> v(x.data() + r0 * d, x.data() + r1 * d);
    auto out = detail::make_result("slice_rows", {m, d}, std::move(v), {x});
    if (out.requires_grad()) {
        auto xn = x.node();
        out.node()->backward_fn = [xn, r0, m, d](const std::vector<T>& g) {
            auto& gx = xn->ensure_grad();
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < d; ++j)
                    gx[static_cast<std::size_t>((r0 + i) * d + j)] += g[static_cast<std::size_t>(i * d + j)];
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions and losses
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
    T acc = T(0);
    for (auto v : x.values()) acc += v;
    auto out = detail::make_result("sum_all", {1}, std::vector<T>{acc}, {x});
    if (out.requires_grad()) {
        auto xn = x.node();
        out.node()->backward_fn = [xn](const std::vector<T>& g) {
            auto& gx = xn->ensure_grad();
            for (auto& e : gx) e += g[0];
        };
    }
    return out;
}

template <class T>
Tensor<T> mean_all(const Tensor<T>& x) {
    return scale(sum_all(x), T(1) / static_cast<T>(x.size()));
}

/// Mean over one axis of a matrix; axis 0 gives a (1 x d) row, axis 1 an (n x 1) column.
template <class T>
Tensor<T> mean_axis(const Tensor<T>& x, int axis) {
    const std::int64_t n = x.rows(), d = x.cols();
    if (axis == 0) {
        std::vector<T> v(static_cast<std::size_t>(d), T(0));
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < d; ++j) v[static_cast<std::size_t>(j)] += x.values()[static_cast<std::size_t>(i * d + j)];
        for (auto& e : v) e /= static_cast<T>(n);
        auto out = detail::make_result("mean_axis0", {1, d}, std::move(v), {x});
        if (out.requires_grad()) {
            auto xn = x.node();
            out.node()->backward_fn = [xn, n, d](const std::vector<T>& g) {
                auto& gx = xn->ensure_grad();
                for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t j = 0; j < d; ++j)
                        gx[static_cast<std::size_t>(i * d + j)] += g[static_cast<std::size_t>(j)] / static_cast<T>(n);
            };
        }
        return out;
    }
    if (axis == 1) {
        std::vector<T> v(static_cast<std::size_t>(n), T(0));
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t j = 0; j < d; ++j) v[static_cast<std::size_t>(i)] += x.values()[static_cast<std::size_t>(i * d + j)];
            v[static_cast<std::size_t>(i)] /= static_cast<T>(d);
        }
        auto out = detail::make_result("mean_axis1", {n, 1}, std::move(v), {x});
        if (out.requires_grad()) {
            auto xn = x.node();
            out.node()->backward_fn = [xn, n, d](const std::vector<T>& g) {
                auto& gx = xn->ensure_grad();
                for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t j = 0; j < d; ++j)
                        gx[static_cast<std::size_t>(i * d + j)] += g[static_cast<std::size_t>(i)] / static_cast<T>(d);
            };
        }
        return out;
    }
    throw ShapeError("mean_axis", "axis must be 0 or 1");
}

template <class T>
Tensor<T> sumsq(const Tensor<T>& x) {
    T acc = T(0);
    for (auto v : x.values()) acc += v * v;
    auto out = detail::make_result("sumsq", {1}, std::vector<T>{acc}, {x});
    if (out.requires_grad()) {
        auto xn = x.node();
        out.node()->backward_fn = [xn](const std::vector<T>& g) {
            auto& gx = xn->ensure_grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += T(2) * g[0] * xn->value[i];
        };
    }
    return out;
}

/// Mean of squared element-wise differences over all entries.
template <class T>
Tensor<T> mse(const Tensor<T>& pred, const Tensor<T>& target) {
    detail::check_same_shape("mse", pred, target);
    T acc = T(0);
    for (std::size_t i = 0; i < pred.values().size(); ++i) {
        T dlt = pred.values()[i] - target.values()[i];
        acc += dlt * dlt;
    }
    acc /= static_cast<T>(pred.size());
    auto out = detail::make_result("mse", {1}, std::vector<T>{acc}, {pred, target});
    if (out.requires_grad()) {
        auto pn = pred.node(), tn = target.node();
        const T inv = T(2) / static_cast<T>(pred.size());
        out.node()->backward_fn = [pn, tn, inv](const std::vector<T>& g) {
            if (pn->requires_grad) {
                auto& gp = pn->ensure_grad();
                for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[0] * inv * (pn->value[i] - tn->value[i]);
            }
            if (tn->requires_grad) {
                auto& gt = tn->ensure_grad();
                for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= g[0] * inv * (pn->value[i] - tn->value[i]);
            }
        };
    }
    return out;
}

/// (1/n) * sum_i w[i] * ||pred_i - target_i||^2 with constant row weights.
template <class T>
Tensor<T> weighted_row_sqnorm_mean(const Tensor<T>& pred, const Tensor<T>& target,
                                   std::vector<T> row_w) {
    detail::check_same_shape("weighted_row_sqnorm_mean", pred, target);
    const std::int64_t n = pred.rows(), d = pred.cols();
    if (static_cast<std::int64_t>(row_w.size()) != n)
        throw ShapeError("weighted_row_sqnorm_mean", "row weight length must equal row count");
    T acc = T(0);
    for (std::int64_t i = 0; i < n; ++i) {
        T row = T(0);
        for (std::int64_t j = 0; j < d; ++j) {
            T dlt = pred.values()[static_cast<std::size_t>(i * d + j)] - target.values()[static_cast<std::size_t>(i * d + j)];
            row += dlt * dlt;
        }
        acc += row_w[static_cast<std::size_t>(i)] * row;
    }
    acc /= static_cast<T>(n);
    auto out = detail::make_result("weighted_row_sqnorm_mean", {1}, std::vector<T>{acc}, {pred, target});
    if (out.requires_grad()) {
        auto pn = pred.node(), tn = target.node();
        out.node()->backward_fn = [pn, tn, row_w, n, d](const std::vector<T>& g) {
            const T inv_n = T(1) / static_cast<T>(n);
            const bool need_p = pn->requires_grad, need_t = tn->requires_grad;
            if (need_p) pn->ensure_grad();
            if (need_t) tn->ensure_grad();
            for (std::int64_t i = 0; i < n; ++i) {
                const T c = g[0] * T(2) * row_w[static_cast<std::size_t>(i)] * inv_n;
                for (std::int64_t j = 0; j < d; ++j) {
                    std::size_t idx = static_cast<std::size_t>(i * d + j);
                    T dlt = pn->value[idx] - tn->value[idx];
                    if (need_p) pn->grad[idx] += c * dlt;
                    if (need_t) tn->grad[idx] -= c * dlt;
                }
            }
        };
    }
    return out;
}

/// Mean softmax cross-entropy of (n x C) logits against integer labels.
/// Ties in downstream argmax resolve to the lowest class index.
template <class T>
Tensor<T> softmax_xent(const Tensor<T>& logits, const std::vector<std::int64_t>& labels) {
    const std::int64_t n = logits.rows(), c = logits.cols();
    if (static_cast<std::int64_t>(labels.size()) != n)
        throw ShapeError("softmax_xent", "labels length must equal rows");
    std::vector<T> probs(logits.values());
    T loss = T(0);
    for (std::int64_t i = 0; i < n; ++i) {
        T* row = probs.data() + i * c;
        T mx = row[0];
        for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        T z = T(0);
        for (std::int64_t j = 0; j < c; ++j) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
        }
        for (std::int64_t j = 0; j < c; ++j) row[j] /= z;
        loss -= std::log(std::max(row[labels[static_cast<std::size_t>(i)]], std::numeric_limits<T>::min()));
    }
    loss /= static_cast<T>(n);
    auto out = detail::make_result("softmax_xent", {1}, std::vector<T>{loss}, {logits});
    if (out.requires_grad()) {
        auto ln = logits.node();
        out.node()->backward_fn = [ln, probs, labels, n, c](const std::vector<T>& g) {
            auto& gl = ln->ensure_grad();
            const T inv_n = T(1) / static_cast<T>(n);
            for (std::int64_t i = 0; i < n; ++i)
                for (std::int64_t j = 0; j < c; ++j) {
                    std::size_t idx = static_cast<std::size_t>(i * c + j);
                    T p = probs[idx] - (labels[static_cast<std::size_t>(i)] == j ? T(1) : T(0));
                    gl[idx] += g[0] * inv_n * p;
                }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// dropout
// ---------------------------------------------------------------------------

/// Inverted dropout; draws one Bernoulli per element from the stream.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double p, RngState& rng) {
    if (p <= 0.0) return x;
    if (p >= 1.0) throw ConfigError("dropout rate must be < 1");
    const T keep_scale = T(1.0 / (1.0 - p));
    std::vector<std::uint8_t> keep(x.values().size());
    for (auto& k : keep) k = rng.next_bernoulli(1.0 - p) ? 1 : 0;
    std::vector<T> v(x.values());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = keep[i] ? v[i] * keep_scale : T(0);
    auto out = detail::make_result("dropout", x.shape(), std::move(v), {x});
    if (out.requires_grad()) {
        auto xn = x.node();
        out.node()->backward_fn = [xn, keep, keep_scale](const std::vector<T>& g) {
            auto& gx = xn->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i)
                if (keep[i]) gx[i] += g[i] * keep_scale;
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

/// Max over coordinates of |analytic - central difference| / (|central| + 1e-12).
/// `f` must be a deterministic scalar-valued function of the parameters.
template <class T, class F>
double finite_diff_check(F&& f, std::vector<Tensor<T>> params, double step) {
    if (step <= 0) throw ConfigError("finite_diff_check: step must be positive");
    for (auto& p : params) p.zero_grad();
    Tensor<T> loss = f();
    loss.backward();
    std::vector<std::vector<T>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    double worst = 0.0;
    NoGradGuard guard;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& vals = params[pi].values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const T saved = vals[i];
            vals[i] = saved + static_cast<T>(step);
            double fp = static_cast<double>(f().item());
            vals[i] = saved - static_cast<T>(step);
            double fm = static_cast<double>(f().item());
            vals[i] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw AutodiffError("finite_diff_check: non-finite value at perturbed point");
            double fd = (fp - fm) / (2.0 * step);
            double rel = std::abs(static_cast<double>(analytic[pi][i]) - fd) / (std::abs(fd) + 1e-12);
            worst = std::max(worst, rel);
        }
    }
    for (auto& p : params) p.zero_grad();
    return worst;
}

template <class T, class F>
double finite_diff_check(F&& f, Tensor<T> param, double step) {
    return finite_diff_check(std::forward<F>(f), std::vector<Tensor<T>>{param}, step);
}

}  // namespace graffe
