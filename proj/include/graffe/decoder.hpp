#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "graffe/encoder.hpp"
#include "graffe/graph.hpp"
#include "graffe/nn.hpp"
#include "graffe/ops.hpp"

namespace graffe {

enum class FusionKind { sum, adanorm };
enum class DecoderLayerKind { mlp, gnn };

inline std::string to_string(FusionKind k) { return k == FusionKind::sum ? "sum" : "adanorm"; }
inline FusionKind fusion_kind_from_string(const std::string& s) {
    if (s == "sum") return FusionKind::sum;
    if (s == "adanorm") return FusionKind::adanorm;
    throw ConfigError("unknown fusion kind: " + s);
}

inline std::string to_string(DecoderLayerKind k) { return k == DecoderLayerKind::mlp ? "mlp" : "gnn"; }
inline DecoderLayerKind decoder_layer_kind_from_string(const std::string& s) {
    if (s == "mlp") return DecoderLayerKind::mlp;
    if (s == "gnn") return DecoderLayerKind::gnn;
    throw ConfigError("unknown decoder layer kind: " + s);
}

struct DecoderConfig {
    std::int64_t depth = 2;       // number of width halvings
    std::int64_t base = 256;      // width after the input projection
    DecoderLayerKind layer_kind = DecoderLayerKind::mlp;
    FusionKind fusion = FusionKind::sum;
    std::int64_t time_width = 128;

    void validate() const {
        if (depth < 0) throw ConfigError("decoder: depth must be non-negative");
        if (base < 1 || base % (std::int64_t(1) << depth) != 0)
            throw ConfigError("decoder: base width must be divisible by 2^depth");
        if (time_width < 2 || time_width % 2 != 0) throw ConfigError("decoder: time width must be even");
        if ((fusion == FusionKind::sum) != (layer_kind == DecoderLayerKind::mlp))
            throw ConfigError("decoder: sum fusion pairs with mlp layers, adanorm with gnn layers");
    }
};

/// Sinusoidal features of integer timesteps: sines in the first half of the
/// row, cosines in the second, frequency 10000^(-2k/width).
template <class T>
Tensor<T> sincos_embedding(const std::vector<std::int64_t>& t, std::int64_t width) {
    if (width % 2 != 0) throw ConfigError("sincos embedding width must be even");
    const std::int64_t n = static_cast<std::int64_t>(t.size());
    const std::int64_t half = width / 2;
    std::vector<T> v(static_cast<std::size_t>(n * width));
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t k = 0; k < half; ++k) {
            double freq = std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(width));
            double arg = static_cast<double>(t[static_cast<std::size_t>(i)]) * freq;
            v[static_cast<std::size_t>(i * width + k)] = static_cast<T>(std::sin(arg));
            v[static_cast<std::size_t>(i * width + half + k)] = static_cast<T>(std::cos(arg));
        }
    }
    return Tensor<T>::from_values({n, width}, std::move(v));
}

/// Positional encoding of t followed by two linear maps with SiLU after each.
template <class T>
struct TimeEmbed {
    std::int64_t width = 0;
    Linear<T> lin1, lin2;

    TimeEmbed() = default;
    TimeEmbed(std::int64_t w, RngState& rng) : width(w), lin1(w, w, rng), lin2(w, w, rng) {
        if (w % 2 != 0) throw ConfigError("time embedding width must be even");
    }

    Tensor<T> forward(const std::vector<std::int64_t>& t) const {
        return silu(lin2.forward(silu(lin1.forward(sincos_embedding<T>(t, width)))));
    }

    void collect(ParamList<T>& out, const std::string& prefix) const {
        lin1.collect(out, prefix + ".lin1");
        lin2.collect(out, prefix + ".lin2");
    }
};

/// h + MLP_t(t_emb) + MLP_z(z); both maps are single zero-initialized linear
/// layers so conditioning starts as an exact identity.
template <class T>
struct FuseSum {
    Linear<T> mlp_t, mlp_z;

    FuseSum() = default;
    FuseSum(std::int64_t time_width, std::int64_t z_width, std::int64_t h_width)
        : mlp_t(Linear<T>::zeros(time_width, h_width)), mlp_z(Linear<T>::zeros(z_width, h_width)) {}

    Tensor<T> forward(const Tensor<T>& h, const Tensor<T>& t_emb, const Tensor<T>& z) const {
        if (t_emb.rows() != h.rows() || z.rows() != h.rows())
            throw ShapeError("fuse_sum", h.shape(), z.shape());
        return add(add(h, mlp_t.forward(t_emb)), mlp_z.forward(z));
    }

    void collect(ParamList<T>& out, const std::string& prefix) const {
        mlp_t.collect(out, prefix + ".mlp_t");
        mlp_z.collect(out, prefix + ".mlp_z");
    }
};

/// z_s * (t_s * LayerNorm(h) + t_b) + z_b with (t_s,t_b) and (z_s,z_b)
/// produced by linear projection. Projections start at scale one, shift zero,
/// so the initial output is plain LayerNorm(h).
template <class T>
struct AdaNorm {
    std::int64_t h_width = 0;
    Linear<T> t_proj, z_proj;  // each maps to 2*h_width: scale then shift

    AdaNorm() = default;
    AdaNorm(std::int64_t time_width, std::int64_t z_width, std::int64_t width) : h_width(width) {
        t_proj = Linear<T>::zeros(time_width, 2 * width);
        z_proj = Linear<T>::zeros(z_width, 2 * width);
        for (std::int64_t j = 0; j < width; ++j) {
            t_proj.b.values()[static_cast<std::size_t>(j)] = T(1);
            z_proj.b.values()[static_cast<std::size_t>(j)] = T(1);
        }
    }

    Tensor<T> forward(const Tensor<T>& h, const Tensor<T>& t_emb, const Tensor<T>& z) const {
        if (t_emb.rows() != h.rows() || z.rows() != h.rows())
            throw ShapeError("ada_norm", h.shape(), z.shape());
        auto tp = t_proj.forward(t_emb);
        auto zp = z_proj.forward(z);
        auto ts = slice_cols(tp, 0, h_width), tb = slice_cols(tp, h_width, 2 * h_width);
        auto zs = slice_cols(zp, 0, h_width), zb = slice_cols(zp, h_width, 2 * h_width);
        return add(mul(zs, add(mul(ts, layer_norm(h)), tb)), zb);
    }

    void collect(ParamList<T>& out, const std::string& prefix) const {
        t_proj.collect(out, prefix + ".t_proj");
        z_proj.collect(out, prefix + ".z_proj");
    }
};

namespace detail {

/// One UNet stage: fuse the conditioning signals, then apply the width map.
template <class T>
struct UnetBlock {
    FusionKind fusion;
    FuseSum<T> fuse_sum_;
    AdaNorm<T> ada_norm_;
    DecoderLayerKind layer_kind;
    Linear<T> mlp_map;
    GinLayer<T> gnn_map;
    Tensor<T> slope;

    UnetBlock() = default;
    UnetBlock(std::int64_t w_in, std::int64_t w_out, std::int64_t time_width, std::int64_t z_width,
              FusionKind f, DecoderLayerKind lk, RngState& rng)
        : fusion(f), layer_kind(lk), slope(Tensor<T>::parameter({1}, {T(0.25)})) {
        if (fusion == FusionKind::sum)
            fuse_sum_ = FuseSum<T>(time_width, z_width, w_in);
        else
            ada_norm_ = AdaNorm<T>(time_width, z_width, w_in);
        if (layer_kind == DecoderLayerKind::mlp)
            mlp_map = Linear<T>(w_in, w_out, rng);
        else
            gnn_map = GinLayer<T>(w_in, w_out, rng);
    }

    Tensor<T> forward(const Tensor<T>& h, const Tensor<T>& t_emb, const Tensor<T>& z,
                      const Graph& g) const {
        Tensor<T> fused = fusion == FusionKind::sum ? fuse_sum_.forward(h, t_emb, z)
                                                    : ada_norm_.forward(h, t_emb, z);
        Tensor<T> mapped = layer_kind == DecoderLayerKind::mlp ? mlp_map.forward(fused)
                                                               : gnn_map.forward(fused, g);
        return prelu(mapped, slope);
    }

    void collect(ParamList<T>& out, const std::string& prefix) const {
        if (fusion == FusionKind::sum)
            fuse_sum_.collect(out, prefix + ".fuse");
        else
            ada_norm_.collect(out, prefix + ".fuse");
        if (layer_kind == DecoderLayerKind::mlp)
            mlp_map.collect(out, prefix + ".map");
        else
            gnn_map.collect(out, prefix + ".map");
        out.push_back({prefix + ".slope", slope});
    }
};

}  // namespace detail

/// Conditional denoising decoder. Input and output projections map between
/// the data width and the internal path; the contracting path halves the
/// hidden width per block and the expansive path doubles it back, adding the
/// same-width contracting state before each mapping. Conditioning on (t, z)
/// happens once per block, before the block's dimensional map.
template <class T>
class GraphUNet {
public:
    GraphUNet() = default;
    GraphUNet(DecoderConfig cfg, std::int64_t data_dim, std::int64_t z_dim, RngState& rng)
        : cfg_(cfg), data_dim_(data_dim), z_dim_(z_dim) {
        cfg_.validate();
        time_embed_ = TimeEmbed<T>(cfg_.time_width, rng);
        in_proj_ = Linear<T>(data_dim, cfg_.base, rng);
        out_proj_ = Linear<T>::zeros(cfg_.base, data_dim);
        if (cfg_.depth == 0) {
            bottom_.emplace_back(cfg_.base, cfg_.base, cfg_.time_width, z_dim, cfg_.fusion, cfg_.layer_kind, rng);
        } else {
            for (std::int64_t i = 0; i < cfg_.depth; ++i) {
                std::int64_t w = cfg_.base >> i;
                contract_.emplace_back(w, w / 2, cfg_.time_width, z_dim, cfg_.fusion, cfg_.layer_kind, rng);
            }
            for (std::int64_t i = cfg_.depth - 1; i >= 0; --i) {
                std::int64_t w = cfg_.base >> (i + 1);
                expand_.emplace_back(w, w * 2, cfg_.time_width, z_dim, cfg_.fusion, cfg_.layer_kind, rng);
            }
        }
    }

    const DecoderConfig& config() const { return cfg_; }
    std::int64_t data_dim() const { return data_dim_; }
    std::int64_t z_dim() const { return z_dim_; }

    /// x_t: (n x d) noisy features; t: per-node timestep; z: (n x z_dim) for
    /// mlp mode, or (B x z_dim) per-graph conditions with `graph_id` given
    /// for gnn mode. The output shape always equals the input shape.
    Tensor<T> forward(const Tensor<T>& x_t, const std::vector<std::int64_t>& t, const Tensor<T>& z,
                      const Graph& g, const std::vector<std::int64_t>* graph_id = nullptr) const {
        if (x_t.cols() != data_dim_) throw ShapeError("unet_forward", x_t.shape(), {x_t.rows(), data_dim_});
        if (z.cols() != z_dim_) throw ShapeError("unet_forward", z.shape(), {z.rows(), z_dim_});
        if (static_cast<std::int64_t>(t.size()) != x_t.rows())
            throw ShapeError("unet_forward", "timestep vector length must equal rows");
        Tensor<T> z_rows = z;
        if (graph_id != nullptr && z.rows() != x_t.rows()) z_rows = gather_rows(z, *graph_id);
        if (z_rows.rows() != x_t.rows()) throw ShapeError("unet_forward", z_rows.shape(), x_t.shape());
        Tensor<T> t_emb = time_embed_.forward(t);

        Tensor<T> h = in_proj_.forward(x_t);
        if (cfg_.depth == 0) {
            Tensor<T> x = bottom_[0].forward(h, t_emb, z_rows, g);
            return out_proj_.forward(x);
        }
        std::vector<Tensor<T>> skips{h};
        for (const auto& block : contract_) {
            h = block.forward(h, t_emb, z_rows, g);
            skips.push_back(h);
        }
        Tensor<T> x = skips.back();  // bottleneck state enters the expansive path
        for (std::size_t i = 0; i < expand_.size(); ++i) {
            x = expand_[i].forward(x, t_emb, z_rows, g);
            x = add(x, skips[expand_.size() - 1 - i]);
        }
        return out_proj_.forward(x);
    }

    void collect(ParamList<T>& out, const std::string& prefix = "decoder") const {
        time_embed_.collect(out, prefix + ".time_embed");
        in_proj_.collect(out, prefix + ".in_proj");
        for (std::size_t i = 0; i < contract_.size(); ++i)
            contract_[i].collect(out, prefix + ".contract" + std::to_string(i));
        for (std::size_t i = 0; i < bottom_.size(); ++i)
            bottom_[i].collect(out, prefix + ".bottom" + std::to_string(i));
        for (std::size_t i = 0; i < expand_.size(); ++i)
            expand_[i].collect(out, prefix + ".expand" + std::to_string(i));
        out_proj_.collect(out, prefix + ".out_proj");
    }

    ParamList<T> params(const std::string& prefix = "decoder") const {
        ParamList<T> out;
        collect(out, prefix);
        return out;
    }

    const TimeEmbed<T>& time_embed() const { return time_embed_; }

    /// Parameter surgery access for the skip-connection tests.
    std::vector<detail::UnetBlock<T>>& expand_blocks() { return expand_; }

private:
    DecoderConfig cfg_;
    std::int64_t data_dim_ = 0, z_dim_ = 0;
    TimeEmbed<T> time_embed_;
    Linear<T> in_proj_, out_proj_;
    std::vector<detail::UnetBlock<T>> contract_, bottom_, expand_;
};

}  // namespace graffe
