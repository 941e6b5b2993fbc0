#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "graffe/common.hpp"
#include "graffe/rng.hpp"

namespace graffe {

inline void log_warning(const std::string& msg) { std::cerr << "[graffe] warning: " << msg << "\n"; }

/// Compressed sparse row adjacency. Neighbor lists are sorted ascending;
/// undirected edges appear in both directions.
struct Csr {
    std::vector<std::int64_t> offsets;  // n+1 entries
    std::vector<std::int64_t> cols;

    std::int64_t node_count() const { return static_cast<std::int64_t>(offsets.size()) - 1; }
    std::int64_t edge_slots() const { return static_cast<std::int64_t>(cols.size()); }
    std::int64_t degree(std::int64_t v) const { return offsets[static_cast<std::size_t>(v + 1)] - offsets[static_cast<std::size_t>(v)]; }
};

enum class Split : std::uint8_t { none = 0, train = 1, val = 2, test = 3 };

inline std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        default: return "none";
    }
}

/// Attributed graph with optional labels and split flags. Immutable by
/// convention once constructed; shared freely across threads.
struct Graph {
    std::int64_t n = 0;
    std::int64_t d = 0;
    std::vector<double> x;  // n*d row-major feature matrix
    Csr adj;
    std::vector<std::int64_t> node_labels;  // size n when present
    bool has_node_labels = false;
    std::int64_t graph_label = -1;
    bool has_graph_label = false;
    std::vector<Split> split;  // size n when present

    double feat(std::int64_t i, std::int64_t j) const { return x[static_cast<std::size_t>(i * d + j)]; }

    /// Validates CSR structure, symmetry and feature finiteness.
    void validate() const {
        if (static_cast<std::int64_t>(adj.offsets.size()) != n + 1)
            throw IoError("graph: offsets length " + std::to_string(adj.offsets.size()) +
                          " does not match node count " + std::to_string(n));
        if (adj.offsets.front() != 0 || adj.offsets.back() != adj.edge_slots())
            throw IoError("graph: CSR offsets do not cover the edge array");
        for (std::size_t i = 0; i + 1 < adj.offsets.size(); ++i)
            if (adj.offsets[i] > adj.offsets[i + 1]) throw IoError("graph: CSR offsets decrease");
        for (auto c : adj.cols)
            if (c < 0 || c >= n)
                throw IoError("graph: edge endpoint " + std::to_string(c) + " outside [0, " + std::to_string(n) + ")");
        for (std::int64_t v = 0; v < n; ++v)
            for (std::int64_t e = adj.offsets[static_cast<std::size_t>(v)]; e < adj.offsets[static_cast<std::size_t>(v + 1)]; ++e) {
                std::int64_t u = adj.cols[static_cast<std::size_t>(e)];
                if (!has_edge(u, v))
                    throw IoError("graph: edge (" + std::to_string(v) + "," + std::to_string(u) + ") present without its reverse");
            }
        if (static_cast<std::int64_t>(x.size()) != n * d) throw IoError("graph: feature matrix size mismatch");
        for (double v : x)
            if (!std::isfinite(v)) throw IoError("graph: non-finite feature value");
        if (has_node_labels && static_cast<std::int64_t>(node_labels.size()) != n)
            throw IoError("graph: node label vector size mismatch");
        if (!split.empty() && static_cast<std::int64_t>(split.size()) != n)
            throw IoError("graph: split vector size mismatch");
    }

    bool has_edge(std::int64_t u, std::int64_t v) const {
        auto b = adj.cols.begin() + adj.offsets[static_cast<std::size_t>(u)];
        auto e = adj.cols.begin() + adj.offsets[static_cast<std::size_t>(u + 1)];
        return std::binary_search(b, e, v);
    }

    /// CSR extended with one self-loop per node (attention neighborhoods).
    Csr with_self_loops() const {
        Csr out;
        out.offsets.resize(static_cast<std::size_t>(n + 1));
        out.cols.reserve(adj.cols.size() + static_cast<std::size_t>(n));
        out.offsets[0] = 0;
        for (std::int64_t v = 0; v < n; ++v) {
            bool placed = false;
            for (std::int64_t e = adj.offsets[static_cast<std::size_t>(v)]; e < adj.offsets[static_cast<std::size_t>(v + 1)]; ++e) {
                std::int64_t u = adj.cols[static_cast<std::size_t>(e)];
                if (!placed && u > v) {
                    out.cols.push_back(v);
                    placed = true;
                }
                out.cols.push_back(u);
            }
            if (!placed) out.cols.push_back(v);
            out.offsets[static_cast<std::size_t>(v + 1)] = static_cast<std::int64_t>(out.cols.size());
        }
        return out;
    }
};

/// Builds a validated Graph from an edge list. Edges are symmetrized unless
/// already mirrored; duplicates are dropped with a warning; self edges are
/// dropped with a warning (the layers add the ego term themselves).
inline Graph make_graph(std::int64_t n, std::int64_t d, std::vector<double> features,
                        const std::vector<std::pair<std::int64_t, std::int64_t>>& edges) {
    Graph g;
    g.n = n;
    g.d = d;
    g.x = std::move(features);
    if (g.x.empty()) g.x.assign(static_cast<std::size_t>(n * d), 0.0);
    std::vector<std::pair<std::int64_t, std::int64_t>> all;
    all.reserve(edges.size() * 2);
    std::int64_t self_edges = 0;
    for (auto [u, v] : edges) {
        if (u < 0 || u >= n || v < 0 || v >= n)
            throw IoError("edge (" + std::to_string(u) + "," + std::to_string(v) + ") references a node outside [0, " +
                          std::to_string(n) + ")");
        if (u == v) {
            ++self_edges;
            continue;
        }
        all.emplace_back(u, v);
        all.emplace_back(v, u);
    }
    if (self_edges > 0) log_warning(std::to_string(self_edges) + " self edge(s) dropped");
    std::sort(all.begin(), all.end());
    std::size_t before = all.size();
    all.erase(std::unique(all.begin(), all.end()), all.end());
    if (all.size() != before) log_warning(std::to_string((before - all.size()) / 2) + " duplicate edge(s) dropped");
    g.adj.offsets.assign(static_cast<std::size_t>(n + 1), 0);
    g.adj.cols.reserve(all.size());
    std::size_t idx = 0;
    for (std::int64_t v = 0; v < n; ++v) {
        while (idx < all.size() && all[idx].first == v) {
            g.adj.cols.push_back(all[idx].second);
            ++idx;
        }
        g.adj.offsets[static_cast<std::size_t>(v + 1)] = static_cast<std::int64_t>(g.adj.cols.size());
    }
    g.validate();
    return g;
}

// ---------------------------------------------------------------------------
// node masking
// ---------------------------------------------------------------------------

/// Bernoulli keep mask over node rows; 1 = kept.
struct MaskRecord {
    std::vector<std::uint8_t> keep;
    double ratio = 0.0;

    double kept_fraction() const {
        if (keep.empty()) return 1.0;
        std::size_t k = 0;
        for (auto v : keep) k += v;
        return static_cast<double>(k) / static_cast<double>(keep.size());
    }
};

/// X' = diag(keep) X with keep ~ Bernoulli(1-m) per row. Kept rows are
/// byte-identical to the input; masked rows are exact zeros.
template <class T>
std::pair<std::vector<T>, MaskRecord> mask_nodes(const std::vector<T>& x, std::int64_t n, std::int64_t d,
                                                 double m, RngState& rng) {
    if (m < 0.0 || m > 1.0) throw ConfigError("mask ratio must lie in [0,1]");
    MaskRecord rec;
    rec.ratio = m;
    rec.keep.resize(static_cast<std::size_t>(n));
    for (auto& k : rec.keep) k = rng.next_bernoulli(1.0 - m) ? 1 : 0;
    std::vector<T> out(x);
    for (std::int64_t i = 0; i < n; ++i)
        if (!rec.keep[static_cast<std::size_t>(i)])
            std::fill(out.begin() + i * d, out.begin() + (i + 1) * d, T(0));
    return {std::move(out), std::move(rec)};
}

// ---------------------------------------------------------------------------
// degree features
// ---------------------------------------------------------------------------

/// One-hot degree features, clamped at `cap`; column count is cap+1.
inline std::vector<Graph> degree_onehot(std::vector<Graph> graphs, std::int64_t cap) {
    if (cap < 1) throw ConfigError("degree_onehot: cap must be >= 1");
    for (auto& g : graphs) {
        g.d = cap + 1;
        g.x.assign(static_cast<std::size_t>(g.n * g.d), 0.0);
        for (std::int64_t v = 0; v < g.n; ++v) {
            std::int64_t deg = std::min<std::int64_t>(g.adj.degree(v), cap);
            g.x[static_cast<std::size_t>(v * g.d + deg)] = 1.0;
        }
    }
    return graphs;
}

/// Maximum degree across a dataset; used as the default one-hot cap.
inline std::int64_t max_degree(const std::vector<Graph>& graphs) {
    std::int64_t mx = 1;
    for (const auto& g : graphs)
        for (std::int64_t v = 0; v < g.n; ++v) mx = std::max(mx, g.adj.degree(v));
    return mx;
}

// ---------------------------------------------------------------------------
// batching
// ---------------------------------------------------------------------------

/// Block-diagonal merge of several graphs; node indices are offset so no
/// edge crosses a graph boundary.
struct GraphBatch {
    Graph merged;
    std::vector<std::int64_t> graph_id;     // per node
    std::vector<std::int64_t> node_counts;  // per graph
    std::vector<std::int64_t> offsets;      // per-graph node ranges, B+1 entries

    std::int64_t graph_count() const { return static_cast<std::int64_t>(node_counts.size()); }
};

inline GraphBatch batch_graphs(const std::vector<Graph>& graphs) {
    if (graphs.empty()) throw ConfigError("batch_graphs: empty graph list");
    const std::int64_t d = graphs[0].d;
    GraphBatch b;
    b.offsets.push_back(0);
    std::int64_t n_total = 0, e_total = 0;
    for (const auto& g : graphs) {
        if (g.d != d) throw ShapeError("batch_graphs", {graphs[0].n, d}, {g.n, g.d});
        n_total += g.n;
        e_total += g.adj.edge_slots();
        b.node_counts.push_back(g.n);
        b.offsets.push_back(n_total);
    }
    b.merged.n = n_total;
    b.merged.d = d;
    b.merged.x.reserve(static_cast<std::size_t>(n_total * d));
    b.merged.adj.offsets.reserve(static_cast<std::size_t>(n_total + 1));
    b.merged.adj.offsets.push_back(0);
    b.merged.adj.cols.reserve(static_cast<std::size_t>(e_total));
    b.graph_id.reserve(static_cast<std::size_t>(n_total));
    std::int64_t base = 0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const Graph& g = graphs[gi];
        b.merged.x.insert(b.merged.x.end(), g.x.begin(), g.x.end());
        for (std::int64_t v = 0; v < g.n; ++v) {
            for (std::int64_t e = g.adj.offsets[static_cast<std::size_t>(v)]; e < g.adj.offsets[static_cast<std::size_t>(v + 1)]; ++e)
                b.merged.adj.cols.push_back(g.adj.cols[static_cast<std::size_t>(e)] + base);
            b.merged.adj.offsets.push_back(static_cast<std::int64_t>(b.merged.adj.cols.size()));
            b.graph_id.push_back(static_cast<std::int64_t>(gi));
        }
        base += g.n;
    }
    b.merged.validate();
    return b;
}

/// Recovers graph `gi` from a batch (inverse of batch_graphs up to labels).
inline Graph slice_batch(const GraphBatch& b, std::int64_t gi) {
    Graph g;
    const std::int64_t lo = b.offsets[static_cast<std::size_t>(gi)], hi = b.offsets[static_cast<std::size_t>(gi + 1)];
    g.n = hi - lo;
    g.d = b.merged.d;
    g.x.assign(b.merged.x.begin() + lo * g.d, b.merged.x.begin() + hi * g.d);
    g.adj.offsets.push_back(0);
    for (std::int64_t v = lo; v < hi; ++v) {
        for (std::int64_t e = b.merged.adj.offsets[static_cast<std::size_t>(v)]; e < b.merged.adj.offsets[static_cast<std::size_t>(v + 1)]; ++e)
            g.adj.cols.push_back(b.merged.adj.cols[static_cast<std::size_t>(e)] - lo);
        g.adj.offsets.push_back(static_cast<std::int64_t>(g.adj.cols.size()));
    }
    g.validate();
    return g;
}

}  // namespace graffe
