#pragma once

#include <cstdint>
#include <vector>

#include "graffe/graph.hpp"
#include "graffe/rng.hpp"
#include "graffe/tensor.hpp"

namespace testutil {

template <class T>
graffe::Tensor<T> rand_tensor(graffe::Shape shape, graffe::RngState& rng, double scale = 1.0,
                              bool requires_grad = false) {
    std::vector<T> v(static_cast<std::size_t>(graffe::numel(shape)));
    for (auto& e : v) e = static_cast<T>(rng.next_normal() * scale);
    return requires_grad ? graffe::Tensor<T>::parameter(std::move(shape), std::move(v))
                         : graffe::Tensor<T>::from_values(std::move(shape), std::move(v));
}

/// Small random undirected graph with n nodes; each pair connected with
/// probability p, plus a spanning chain to avoid isolated components.
inline graffe::Graph random_graph(std::int64_t n, std::int64_t d, double p, graffe::RngState& rng,
                                  bool chain = true) {
    std::vector<std::pair<std::int64_t, std::int64_t>> edges;
    for (std::int64_t u = 0; u < n; ++u)
        for (std::int64_t v = u + 1; v < n; ++v)
            if (rng.next_bernoulli(p)) edges.emplace_back(u, v);
    if (chain)
        for (std::int64_t u = 0; u + 1 < n; ++u) edges.emplace_back(u, u + 1);
    std::vector<double> feats(static_cast<std::size_t>(n * d));
    for (auto& f : feats) f = rng.next_normal();
    return graffe::make_graph(n, d, std::move(feats), edges);
}

/// Applies a node permutation to a graph (features and adjacency).
inline graffe::Graph permute_graph(const graffe::Graph& g, const std::vector<std::int64_t>& perm) {
    std::vector<std::pair<std::int64_t, std::int64_t>> edges;
    for (std::int64_t v = 0; v < g.n; ++v)
        for (std::int64_t e = g.adj.offsets[static_cast<std::size_t>(v)]; e < g.adj.offsets[static_cast<std::size_t>(v + 1)]; ++e) {
            std::int64_t u = g.adj.cols[static_cast<std::size_t>(e)];
            if (v < u) edges.emplace_back(perm[static_cast<std::size_t>(v)], perm[static_cast<std::size_t>(u)]);
        }
    std::vector<double> feats(static_cast<std::size_t>(g.n * g.d));
    for (std::int64_t v = 0; v < g.n; ++v)
        for (std::int64_t j = 0; j < g.d; ++j)
            feats[static_cast<std::size_t>(perm[static_cast<std::size_t>(v)] * g.d + j)] = g.feat(v, j);
    return graffe::make_graph(g.n, g.d, std::move(feats), edges);
}

inline std::vector<std::int64_t> random_permutation(std::int64_t n, graffe::RngState& rng) {
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (std::int64_t i = n - 1; i > 0; --i) {
        auto j = static_cast<std::int64_t>(rng.next_uniform_int(static_cast<std::uint64_t>(i + 1)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

}  // namespace testutil
