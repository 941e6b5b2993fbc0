#pragma once

#include <string>
#include <vector>

#include "graffe/graph.hpp"
#include "graffe/nn.hpp"
#include "graffe/ops.hpp"

namespace graffe {

enum class LayerKind { gat, gin };
enum class ReadoutKind { mean, sum };

inline std::string to_string(LayerKind k) { return k == LayerKind::gat ? "gat" : "gin"; }
inline LayerKind layer_kind_from_string(const std::string& s) {
    if (s == "gat") return LayerKind::gat;
    if (s == "gin") return LayerKind::gin;
    throw ConfigError("unknown encoder layer kind: " + s);
}

inline std::string to_string(ReadoutKind k) { return k == ReadoutKind::mean ? "mean" : "sum"; }
inline ReadoutKind readout_kind_from_string(const std::string& s) {
    if (s == "mean") return ReadoutKind::mean;
    if (s == "sum") return ReadoutKind::sum;
    throw ConfigError("unknown readout kind: " + s);
}

struct EncoderConfig {
    LayerKind layer_kind = LayerKind::gat;
    std::int64_t layers = 2;
    std::int64_t hidden = 256;
    std::int64_t heads = 4;      // GAT only
    double feat_drop = 0.0;
    double att_drop = 0.0;       // GAT only
    ReadoutKind readout = ReadoutKind::mean;  // graph tasks

    void validate() const {
        if (layers < 1) throw ConfigError("encoder: need at least one layer");
        if (hidden < 1) throw ConfigError("encoder: hidden width must be positive");
        if (layer_kind == LayerKind::gat && heads >= 1 && hidden % heads != 0)
            throw ConfigError("encoder: hidden width must be divisible by head count");
        if (feat_drop < 0 || feat_drop >= 1 || att_drop < 0 || att_drop >= 1)
            throw ConfigError("encoder: dropout rates must lie in [0,1)");
    }
};

namespace detail {

/// Per-edge arrays for attention over N(v) plus the self loop: for every
/// node the incoming edge segment, the source node of each edge, and the
/// segment owner (destination) of each edge.
struct AttentionIndex {
    std::vector<std::int64_t> offsets;
    std::vector<std::int64_t> src;
    std::vector<std::int64_t> dst;
};

inline AttentionIndex attention_index(const Graph& g) {
    AttentionIndex ix;
    Csr sl = g.with_self_loops();
    ix.offsets = std::move(sl.offsets);
    ix.src = std::move(sl.cols);
    ix.dst.resize(ix.src.size());
    for (std::int64_t v = 0; v < g.n; ++v)
        for (std::int64_t e = ix.offsets[static_cast<std::size_t>(v)]; e < ix.offsets[static_cast<std::size_t>(v + 1)]; ++e)
            ix.dst[static_cast<std::size_t>(e)] = v;
    return ix;
}

}  // namespace detail

/// Single- or multi-head graph attention layer. Hidden layers concatenate
/// their heads; the final layer averages them so the output width stays at
/// the configured hidden size.
template <class T>
struct GatLayer {
    struct Head {
        Tensor<T> w;       // in x dh
        Tensor<T> attn_l;  // dh x 1
        Tensor<T> attn_r;  // dh x 1
    };
    std::vector<Head> heads;
    Tensor<T> bias;  // out width
    bool average = false;
    double att_drop = 0.0;

    GatLayer() = default;
    GatLayer(std::int64_t in, std::int64_t out, std::int64_t n_heads, bool average_heads,
             double attention_dropout, RngState& rng)
        : average(average_heads), att_drop(attention_dropout) {
        std::int64_t dh = average_heads ? out : out / n_heads;
        for (std::int64_t h = 0; h < n_heads; ++h) {
            Head head;
            head.w = fan_in_uniform<T>({in, dh}, in, rng);
            head.attn_l = fan_in_uniform<T>({dh, 1}, dh, rng);
            head.attn_r = fan_in_uniform<T>({dh, 1}, dh, rng);
            heads.push_back(std::move(head));
        }
        bias = zero_param<T>({out});
    }

    Tensor<T> forward(const Tensor<T>& h, const detail::AttentionIndex& ix, bool training,
                      RngState& rng) const {
        std::vector<Tensor<T>> outs;
        outs.reserve(heads.size());
        for (const auto& head : heads) {
            auto wh = matmul(h, head.w);
            auto sl = matmul(wh, head.attn_l);
            auto sr = matmul(wh, head.attn_r);
            auto score = leaky_relu(add(gather_rows(sl, ix.dst), gather_rows(sr, ix.src)), T(0.2));
            auto alpha = segment_softmax(score, ix.offsets);
            if (training && att_drop > 0.0) alpha = dropout(alpha, att_drop, rng);
            outs.push_back(segment_weighted_gather_sum(alpha, wh, ix.src, ix.offsets));
        }
        Tensor<T> merged;
        if (average) {
            merged = outs[0];
            for (std::size_t i = 1; i < outs.size(); ++i) merged = add(merged, outs[i]);
            merged = scale(merged, T(1) / static_cast<T>(outs.size()));
        } else {
            merged = outs.size() == 1 ? outs[0] : concat_cols(outs);
        }
        return add_bias(merged, bias);
    }

    void collect(ParamList<T>& out, const std::string& prefix) const {
        for (std::size_t h = 0; h < heads.size(); ++h) {
            out.push_back({prefix + ".head" + std::to_string(h) + ".w", heads[h].w});
            out.push_back({prefix + ".head" + std::to_string(h) + ".attn_l", heads[h].attn_l});
            out.push_back({prefix + ".head" + std::to_string(h) + ".attn_r", heads[h].attn_r});
        }
        out.push_back({prefix + ".bias", bias});
    }
};

/// Graph isomorphism layer: MLP((1 + eps) h_v + sum of neighbor rows) with a
/// learnable eps initialized at zero.
template <class T>
struct GinLayer {
    Tensor<T> eps;
    Linear<T> lin1, lin2;
    Tensor<T> mlp_slope;  // PReLU between the two linear maps

    GinLayer() = default;
    GinLayer(std::int64_t in, std::int64_t out, RngState& rng)
        : eps(zero_param<T>({1})), lin1(in, out, rng), lin2(out, out, rng),
          mlp_slope(Tensor<T>::parameter({1}, {T(0.25)})) {}

    Tensor<T> forward(const Tensor<T>& h, const Graph& g) const {
        auto ego = scale_t(h, add(eps, Tensor<T>::scalar(T(1))));
        auto agg = add(ego, neighbor_sum(h, g.adj.offsets, g.adj.cols));
        return lin2.forward(prelu(lin1.forward(agg), mlp_slope));
    }

    void collect(ParamList<T>& out, const std::string& prefix) const {
        out.push_back({prefix + ".eps", eps});
        lin1.collect(out, prefix + ".lin1");
        lin2.collect(out, prefix + ".lin2");
        out.push_back({prefix + ".mlp_slope", mlp_slope});
    }
};

template <class T>
struct Representation {
    Tensor<T> z;        // n x hidden node representations
    Tensor<T> readout;  // B x hidden for graph tasks, undefined otherwise
    MaskRecord mask;
};

/// Message-passing encoder: mask, feature dropout, L layers with PReLU, and
/// an optional per-graph readout. PReLU is an assumption the source material
/// leaves open; it follows the masked-autoencoder lineage convention.
template <class T>
class Encoder {
public:
    Encoder() = default;
    Encoder(EncoderConfig cfg, std::int64_t in_dim, RngState& rng) : cfg_(cfg), in_dim_(in_dim) {
        cfg_.validate();
        std::int64_t in = in_dim;
        for (std::int64_t l = 0; l < cfg_.layers; ++l) {
            bool final_layer = (l == cfg_.layers - 1);
            if (cfg_.layer_kind == LayerKind::gat) {
                gat_.emplace_back(in, cfg_.hidden, cfg_.heads, final_layer, cfg_.att_drop, rng);
            } else {
                gin_.emplace_back(in, cfg_.hidden, rng);
            }
            slopes_.push_back(Tensor<T>::parameter({1}, {T(0.25)}));
            in = cfg_.hidden;
        }
    }

    const EncoderConfig& config() const { return cfg_; }
    std::int64_t input_dim() const { return in_dim_; }

    /// Forward pass over already-masked (or clean) features.
    Tensor<T> forward(const Tensor<T>& features, const Graph& g, bool training, RngState& rng) const {
        if (features.rows() != g.n) throw ShapeError("encoder", features.shape(), {g.n, in_dim_});
        detail::AttentionIndex ix;
        if (cfg_.layer_kind == LayerKind::gat) ix = detail::attention_index(g);
        Tensor<T> h = features;
        for (std::size_t l = 0; l < slopes_.size(); ++l) {
            if (training && cfg_.feat_drop > 0.0) h = dropout(h, cfg_.feat_drop, rng);
            h = cfg_.layer_kind == LayerKind::gat ? gat_[l].forward(h, ix, training, rng)
                                                  : gin_[l].forward(h, g);
            h = prelu(h, slopes_[l]);
        }
        return h;
    }

    /// Mask-then-encode. Masking and dropout apply only while training;
    /// inference (training=false) is a deterministic function of the inputs.
    Representation<T> encode(const Graph& g, double mask_ratio, RngState& rng, bool training) const {
        std::vector<T> feats(g.x.size());
        for (std::size_t i = 0; i < feats.size(); ++i) feats[i] = static_cast<T>(g.x[i]);
        Representation<T> rep;
        if (training && mask_ratio > 0.0) {
            auto [masked, rec] = mask_nodes(feats, g.n, g.d, mask_ratio, rng);
            feats = std::move(masked);
            rep.mask = std::move(rec);
        } else {
            rep.mask.ratio = 0.0;
            rep.mask.keep.assign(static_cast<std::size_t>(g.n), 1);
        }
        auto x = Tensor<T>::from_values({g.n, g.d}, std::move(feats));
        rep.z = forward(x, g, training, rng);
        return rep;
    }

    Representation<T> encode(const GraphBatch& batch, double mask_ratio, RngState& rng, bool training) const {
        Representation<T> rep = encode(batch.merged, mask_ratio, rng, training);
        rep.readout = readout(rep.z, batch);
        return rep;
    }

    Tensor<T> readout(const Tensor<T>& z, const GraphBatch& batch) const {
        return segment_reduce_rows(z, batch.offsets, cfg_.readout == ReadoutKind::mean);
    }

    void collect(ParamList<T>& out, const std::string& prefix = "encoder") const {
        for (std::size_t l = 0; l < slopes_.size(); ++l) {
            std::string lp = prefix + ".layer" + std::to_string(l);
            if (cfg_.layer_kind == LayerKind::gat)
                gat_[l].collect(out, lp);
            else
                gin_[l].collect(out, lp);
            out.push_back({lp + ".slope", slopes_[l]});
        }
    }

    ParamList<T> params(const std::string& prefix = "encoder") const {
        ParamList<T> out;
        collect(out, prefix);
        return out;
    }

private:
    EncoderConfig cfg_;
    std::int64_t in_dim_ = 0;
    std::vector<GatLayer<T>> gat_;
    std::vector<GinLayer<T>> gin_;
    std::vector<Tensor<T>> slopes_;
};

}  // namespace graffe
