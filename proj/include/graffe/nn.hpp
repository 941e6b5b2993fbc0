#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "graffe/ops.hpp"
#include "graffe/rng.hpp"
#include "graffe/tensor.hpp"

namespace graffe {

template <class T>
struct NamedParam {
    std::string name;
    Tensor<T> tensor;
};

template <class T>
using ParamList = std::vector<NamedParam<T>>;

template <class T>
std::vector<Tensor<T>> tensors_of(const ParamList<T>& params) {
    std::vector<Tensor<T>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.tensor);
    return out;
}

/// Fan-in scaled uniform init on (-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <class T>
Tensor<T> fan_in_uniform(Shape shape, std::int64_t fan_in, RngState& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::int64_t>(fan_in, 1)));
    std::vector<T> v(static_cast<std::size_t>(numel(shape)));
    for (auto& e : v) e = static_cast<T>((2.0 * rng.next_uniform() - 1.0) * bound);
    return Tensor<T>::parameter(std::move(shape), std::move(v));
}

template <class T>
Tensor<T> zero_param(Shape shape) {
    std::vector<T> v(static_cast<std::size_t>(numel(shape)), T(0));
    return Tensor<T>::parameter(std::move(shape), std::move(v));
}

/// Dense layer y = xW + b.
template <class T>
struct Linear {
    Tensor<T> w, b;

    Linear() = default;
    Linear(std::int64_t in, std::int64_t out, RngState& rng)
        : w(fan_in_uniform<T>({in, out}, in, rng)), b(zero_param<T>({out})) {}

    static Linear zeros(std::int64_t in, std::int64_t out) {
        Linear l;
        l.w = zero_param<T>({in, out});
        l.b = zero_param<T>({out});
        return l;
    }

    Tensor<T> forward(const Tensor<T>& x) const { return add_bias(matmul(x, w), b); }

    void collect(ParamList<T>& out, const std::string& prefix) const {
        out.push_back({prefix + ".w", w});
        out.push_back({prefix + ".b", b});
    }
};

}  // namespace graffe
