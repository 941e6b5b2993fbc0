#pragma once

#include <cstdint>
#include <vector>

#include "graffe/graph.hpp"
#include "graffe/rng.hpp"

namespace graffe {

/// Synthetic citation-style node dataset: a stochastic block model with
/// class-correlated features and Planetoid-style splits. Used by the
/// integration tests and the datagen tool; not a stand-in for any published
/// benchmark.
struct SynthNodeSpec {
    std::int64_t nodes = 600;
    std::int64_t classes = 4;
    std::int64_t feat_dim = 32;
    double feature_signal = 1.0;    // prototype strength relative to unit noise
    double p_in = 0.02;             // same-class edge probability
    double p_out = 0.002;           // cross-class edge probability
    std::int64_t train_per_class = 20;
    std::int64_t val_count = 120;
};

inline Graph synth_node_dataset(const SynthNodeSpec& spec, RngState& rng) {
    const std::int64_t n = spec.nodes, d = spec.feat_dim, c = spec.classes;
    std::vector<std::int64_t> labels(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % c;

    std::vector<double> proto(static_cast<std::size_t>(c * d));
    for (auto& v : proto) v = rng.next_normal();
    std::vector<double> feats(static_cast<std::size_t>(n * d));
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < d; ++j)
            feats[static_cast<std::size_t>(i * d + j)] =
                spec.feature_signal * proto[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)] * d + j)] +
                rng.next_normal();

    std::vector<std::pair<std::int64_t, std::int64_t>> edges;
    for (std::int64_t u = 0; u < n; ++u)
        for (std::int64_t v = u + 1; v < n; ++v) {
            double p = labels[static_cast<std::size_t>(u)] == labels[static_cast<std::size_t>(v)] ? spec.p_in : spec.p_out;
            if (rng.next_bernoulli(p)) edges.emplace_back(u, v);
        }

    Graph g = make_graph(n, d, std::move(feats), edges);
    g.node_labels = labels;
    g.has_node_labels = true;
    g.split.assign(static_cast<std::size_t>(n), Split::none);
    std::vector<std::int64_t> taken(static_cast<std::size_t>(c), 0);
    std::int64_t val_used = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t cls = labels[static_cast<std::size_t>(i)];
        if (taken[static_cast<std::size_t>(cls)] < spec.train_per_class) {
            g.split[static_cast<std::size_t>(i)] = Split::train;
            ++taken[static_cast<std::size_t>(cls)];
        } else if (val_used < spec.val_count) {
            g.split[static_cast<std::size_t>(i)] = Split::val;
            ++val_used;
        } else {
            g.split[static_cast<std::size_t>(i)] = Split::test;
        }
    }
    return g;
}

/// Synthetic graph-classification dataset with structure-separated classes:
/// rings (degree-regular) versus hubs (star-like), so degree features carry
/// the label signal.
struct SynthGraphSpec {
    std::int64_t count = 60;
    std::int64_t min_nodes = 8;
    std::int64_t max_nodes = 16;
};

inline std::vector<Graph> synth_graph_dataset(const SynthGraphSpec& spec, RngState& rng) {
    std::vector<Graph> out;
    out.reserve(static_cast<std::size_t>(spec.count));
    for (std::int64_t gi = 0; gi < spec.count; ++gi) {
        std::int64_t n = spec.min_nodes +
                         static_cast<std::int64_t>(rng.next_uniform_int(
                             static_cast<std::uint64_t>(spec.max_nodes - spec.min_nodes + 1)));
        std::vector<std::pair<std::int64_t, std::int64_t>> edges;
        std::int64_t label = gi % 2;
        if (label == 0) {
            // ring with a couple of random chords
            for (std::int64_t v = 0; v < n; ++v) edges.emplace_back(v, (v + 1) % n);
            for (int extra = 0; extra < 2; ++extra) {
                auto u = static_cast<std::int64_t>(rng.next_uniform_int(static_cast<std::uint64_t>(n)));
                auto w = static_cast<std::int64_t>(rng.next_uniform_int(static_cast<std::uint64_t>(n)));
                if (u != w) edges.emplace_back(u, w);
            }
        } else {
            // hub-and-spokes with a short tail
            for (std::int64_t v = 1; v < n; ++v) edges.emplace_back(0, v);
            for (std::int64_t v = 1; v + 1 < std::min<std::int64_t>(n, 4); ++v) edges.emplace_back(v, v + 1);
        }
        Graph g = make_graph(n, 0, {}, edges);
        g.graph_label = label;
        g.has_graph_label = true;
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace graffe
