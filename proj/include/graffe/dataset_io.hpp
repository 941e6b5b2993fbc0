#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "graffe/graph.hpp"

namespace graffe {

namespace csv {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::int64_t parse_int(const std::string& s, const std::string& context) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw IoError(context + ": expected integer, got '" + s + "'");
    return v;
}

inline double parse_double(const std::string& s, const std::string& context) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw IoError(context + ": expected number, got '" + s + "'");
    return v;
}

inline std::vector<std::vector<std::string>> read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("missing file: " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        rows.push_back(split_line(line));
    }
    if (rows.empty()) throw IoError("empty file: " + path.string());
    return rows;
}

}  // namespace csv

struct LoadOptions {
    bool standardize = true;  // per-column z-score over training nodes
};

/// Per-column zero mean / unit variance computed over training nodes
/// (all nodes when no split is present), with a 1e-8 floor for constant columns.
inline void standardize_features(Graph& g) {
    if (g.n == 0 || g.d == 0) return;
    std::vector<std::int64_t> fit;
    for (std::int64_t i = 0; i < g.n; ++i)
        if (g.split.empty() || g.split[static_cast<std::size_t>(i)] == Split::train) fit.push_back(i);
    if (fit.empty()) {
        fit.resize(static_cast<std::size_t>(g.n));
        for (std::int64_t i = 0; i < g.n; ++i) fit[static_cast<std::size_t>(i)] = i;
    }
    std::vector<double> mean(static_cast<std::size_t>(g.d), 0.0), var(static_cast<std::size_t>(g.d), 0.0);
    for (auto i : fit)
        for (std::int64_t j = 0; j < g.d; ++j) mean[static_cast<std::size_t>(j)] += g.feat(i, j);
    for (auto& m : mean) m /= static_cast<double>(fit.size());
    for (auto i : fit)
        for (std::int64_t j = 0; j < g.d; ++j) {
            double c = g.feat(i, j) - mean[static_cast<std::size_t>(j)];
            var[static_cast<std::size_t>(j)] += c * c;
        }
    for (std::int64_t j = 0; j < g.d; ++j) {
        double sd = std::sqrt(var[static_cast<std::size_t>(j)] / static_cast<double>(fit.size()) + 1e-8);
        for (std::int64_t i = 0; i < g.n; ++i)
            g.x[static_cast<std::size_t>(i * g.d + j)] = (g.feat(i, j) - mean[static_cast<std::size_t>(j)]) / sd;
    }
}

/// Loads `nodes.csv`, `edges.csv` and optional `splits.csv` from a directory.
/// nodes.csv: node_id, feat_0..feat_{d-1}[, label]; edges.csv: src,dst.
inline Graph load_node_dataset(const std::filesystem::path& dir, const LoadOptions& opts = {}) {
    auto nodes = csv::read_table(dir / "nodes.csv");
    const auto& header = nodes[0];
    if (header.size() < 2) throw IoError("nodes.csv: header must name node_id and at least one feature");
    bool has_label = header.back() == "label";
    std::int64_t d = static_cast<std::int64_t>(header.size()) - 1 - (has_label ? 1 : 0);
    if (d < 1) throw IoError("nodes.csv: no feature columns");
    std::int64_t n = static_cast<std::int64_t>(nodes.size()) - 1;

    std::vector<double> feats(static_cast<std::size_t>(n * d), 0.0);
    std::vector<std::int64_t> labels(static_cast<std::size_t>(n), -1);
    std::vector<bool> filled(static_cast<std::size_t>(n), false);
    for (std::size_t r = 1; r < nodes.size(); ++r) {
        const auto& row = nodes[r];
        if (row.size() != header.size())
            throw IoError("nodes.csv row " + std::to_string(r) + ": expected " + std::to_string(header.size()) +
                          " columns, got " + std::to_string(row.size()));
        std::int64_t id = csv::parse_int(row[0], "nodes.csv node_id");
        if (id < 0 || id >= n)
            throw IoError("nodes.csv: node_id " + std::to_string(id) + " outside [0, " + std::to_string(n) + ")");
        if (filled[static_cast<std::size_t>(id)]) throw IoError("nodes.csv: duplicate node_id " + std::to_string(id));
        filled[static_cast<std::size_t>(id)] = true;
        for (std::int64_t j = 0; j < d; ++j)
            feats[static_cast<std::size_t>(id * d + j)] =
                csv::parse_double(row[static_cast<std::size_t>(j + 1)], "nodes.csv feature");
        if (has_label) labels[static_cast<std::size_t>(id)] = csv::parse_int(row.back(), "nodes.csv label");
    }

    auto edge_rows = csv::read_table(dir / "edges.csv");
    std::vector<std::pair<std::int64_t, std::int64_t>> edges;
    edges.reserve(edge_rows.size());
    for (std::size_t r = 1; r < edge_rows.size(); ++r) {
        const auto& row = edge_rows[r];
        if (row.size() != 2) throw IoError("edges.csv row " + std::to_string(r) + ": expected src,dst");
        edges.emplace_back(csv::parse_int(row[0], "edges.csv src"), csv::parse_int(row[1], "edges.csv dst"));
    }

    Graph g = make_graph(n, d, std::move(feats), edges);
    if (has_label) {
        g.node_labels = std::move(labels);
        g.has_node_labels = true;
    }

    auto splits_path = dir / "splits.csv";
    if (std::filesystem::exists(splits_path)) {
        auto split_rows = csv::read_table(splits_path);
        g.split.assign(static_cast<std::size_t>(n), Split::none);
        for (std::size_t r = 1; r < split_rows.size(); ++r) {
            const auto& row = split_rows[r];
            if (row.size() != 2) throw IoError("splits.csv row " + std::to_string(r) + ": expected node_id,split");
            std::int64_t id = csv::parse_int(row[0], "splits.csv node_id");
            if (id < 0 || id >= n)
                throw IoError("splits.csv: node_id " + std::to_string(id) + " outside [0, " + std::to_string(n) + ")");
            const std::string& s = row[1];
            if (s == "train")
                g.split[static_cast<std::size_t>(id)] = Split::train;
            else if (s == "val")
                g.split[static_cast<std::size_t>(id)] = Split::val;
            else if (s == "test")
                g.split[static_cast<std::size_t>(id)] = Split::test;
            else
                throw IoError("splits.csv: unknown split '" + s + "'");
        }
    }

    if (opts.standardize) standardize_features(g);
    g.validate();
    return g;
}

/// Loads `graphs.csv` (graph_id,label) and `graph_edges.csv`
/// (graph_id,src,dst with per-graph local indices). Features are left empty;
/// call degree_onehot afterwards. Labels are remapped to contiguous 0-based ids.
inline std::vector<Graph> load_graph_dataset(const std::filesystem::path& dir) {
    auto graph_rows = csv::read_table(dir / "graphs.csv");
    std::int64_t b = static_cast<std::int64_t>(graph_rows.size()) - 1;
    if (b < 1) throw IoError("graphs.csv: no graphs listed");
    std::vector<std::int64_t> raw_labels(static_cast<std::size_t>(b));
    std::vector<bool> filled(static_cast<std::size_t>(b), false);
    for (std::size_t r = 1; r < graph_rows.size(); ++r) {
        const auto& row = graph_rows[r];
        if (row.size() != 2) throw IoError("graphs.csv row " + std::to_string(r) + ": expected graph_id,label");
        std::int64_t id = csv::parse_int(row[0], "graphs.csv graph_id");
        if (id < 0 || id >= b)
            throw IoError("graphs.csv: graph_id " + std::to_string(id) + " outside [0, " + std::to_string(b) + ")");
        if (filled[static_cast<std::size_t>(id)]) throw IoError("graphs.csv: duplicate graph_id " + std::to_string(id));
        filled[static_cast<std::size_t>(id)] = true;
        raw_labels[static_cast<std::size_t>(id)] = csv::parse_int(row[1], "graphs.csv label");
    }

    std::map<std::int64_t, std::int64_t> remap;
    for (auto l : raw_labels) remap.emplace(l, 0);
    std::int64_t next = 0;
    for (auto& [k, v] : remap) v = next++;

    auto edge_rows = csv::read_table(dir / "graph_edges.csv");
    std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>> edges(static_cast<std::size_t>(b));
    std::vector<std::int64_t> n_nodes(static_cast<std::size_t>(b), 0);
    for (std::size_t r = 1; r < edge_rows.size(); ++r) {
        const auto& row = edge_rows[r];
        if (row.size() != 3) throw IoError("graph_edges.csv row " + std::to_string(r) + ": expected graph_id,src,dst");
        std::int64_t gid = csv::parse_int(row[0], "graph_edges.csv graph_id");
        if (gid < 0 || gid >= b)
            throw IoError("graph_edges.csv: graph_id " + std::to_string(gid) + " outside [0, " + std::to_string(b) + ")");
        std::int64_t u = csv::parse_int(row[1], "graph_edges.csv src");
        std::int64_t v = csv::parse_int(row[2], "graph_edges.csv dst");
        edges[static_cast<std::size_t>(gid)].emplace_back(u, v);
        n_nodes[static_cast<std::size_t>(gid)] = std::max({n_nodes[static_cast<std::size_t>(gid)], u + 1, v + 1});
    }

    std::vector<Graph> out;
    out.reserve(static_cast<std::size_t>(b));
    for (std::int64_t gi = 0; gi < b; ++gi) {
        if (n_nodes[static_cast<std::size_t>(gi)] == 0)
            throw IoError("graph " + std::to_string(gi) + " has zero nodes");
        Graph g = make_graph(n_nodes[static_cast<std::size_t>(gi)], 0, {}, edges[static_cast<std::size_t>(gi)]);
        g.graph_label = remap.at(raw_labels[static_cast<std::size_t>(gi)]);
        g.has_graph_label = true;
        out.push_back(std::move(g));
    }
    return out;
}

// ---------------------------------------------------------------------------
// writers (round-trip counterparts, also used by the synthetic generator)
// ---------------------------------------------------------------------------

inline void save_node_dataset(const Graph& g, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "nodes.csv");
        if (!out) throw IoError("cannot write " + (dir / "nodes.csv").string());
        out << "node_id";
        for (std::int64_t j = 0; j < g.d; ++j) out << ",feat_" << j;
        if (g.has_node_labels) out << ",label";
        out << "\n";
        out.precision(17);
        for (std::int64_t i = 0; i < g.n; ++i) {
            out << i;
            for (std::int64_t j = 0; j < g.d; ++j) out << ',' << g.feat(i, j);
            if (g.has_node_labels) out << ',' << g.node_labels[static_cast<std::size_t>(i)];
            out << "\n";
        }
    }
    {
        std::ofstream out(dir / "edges.csv");
        out << "src,dst\n";
        for (std::int64_t v = 0; v < g.n; ++v)
            for (std::int64_t e = g.adj.offsets[static_cast<std::size_t>(v)]; e < g.adj.offsets[static_cast<std::size_t>(v + 1)]; ++e) {
                std::int64_t u = g.adj.cols[static_cast<std::size_t>(e)];
                if (v < u) out << v << ',' << u << "\n";
            }
    }
    if (!g.split.empty()) {
        std::ofstream out(dir / "splits.csv");
        out << "node_id,split\n";
        for (std::int64_t i = 0; i < g.n; ++i)
            if (g.split[static_cast<std::size_t>(i)] != Split::none)
                out << i << ',' << to_string(g.split[static_cast<std::size_t>(i)]) << "\n";
    }
}

inline void save_graph_dataset(const std::vector<Graph>& graphs, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "graphs.csv");
        out << "graph_id,label\n";
        for (std::size_t gi = 0; gi < graphs.size(); ++gi) out << gi << ',' << graphs[gi].graph_label << "\n";
    }
    {
        std::ofstream out(dir / "graph_edges.csv");
        out << "graph_id,src,dst\n";
        for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
            const Graph& g = graphs[gi];
            for (std::int64_t v = 0; v < g.n; ++v)
                for (std::int64_t e = g.adj.offsets[static_cast<std::size_t>(v)]; e < g.adj.offsets[static_cast<std::size_t>(v + 1)]; ++e) {
                    std::int64_t u = g.adj.cols[static_cast<std::size_t>(e)];
                    if (v < u) out << gi << ',' << v << ',' << u << "\n";
                }
        }
    }
}

}  // namespace graffe
