#include <gtest/gtest.h>

#include <cmath>

#include "graffe/encoder.hpp"
#include "test_util.hpp"

using namespace graffe;
using testutil::rand_tensor;

namespace {

EncoderConfig gat_config(std::int64_t hidden, std::int64_t heads) {
    EncoderConfig cfg;
    cfg.layer_kind = LayerKind::gat;
    cfg.layers = 2;
    cfg.hidden = hidden;
    cfg.heads = heads;
    return cfg;
}

EncoderConfig gin_config(std::int64_t hidden) {
    EncoderConfig cfg;
    cfg.layer_kind = LayerKind::gin;
    cfg.layers = 2;
    cfg.hidden = hidden;
    return cfg;
}

}  // namespace

TEST(EncoderConfig, Validation) {
    EncoderConfig cfg = gat_config(10, 4);
    EXPECT_THROW(cfg.validate(), ConfigError);  // 10 % 4 != 0
    cfg = gat_config(8, 4);
    cfg.feat_drop = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.feat_drop = 0.5;
    EXPECT_NO_THROW(cfg.validate());
}

TEST(GatLayer, IsolatedNodeSelfAttentionIsIdentity) {
    RngState rng(31);
    Graph g = make_graph(1, 3, {0.5, -1.0, 2.0}, {});
    GatLayer<double> layer(3, 4, 1, false, 0.0, rng);
    auto ix = detail::attention_index(g);
    auto h = Tensor<double>::from_values({1, 3}, {0.5, -1.0, 2.0});
    RngState fwd_rng(0);
    auto out = layer.forward(h, ix, false, fwd_rng);
    auto expect = add_bias(matmul(h, layer.heads[0].w), layer.bias);
    for (std::size_t i = 0; i < out.values().size(); ++i)
        EXPECT_NEAR(out.values()[i], expect.values()[i], 1e-14);
}

TEST(GatLayer, AttentionSumsToOne) {
    RngState rng(32);
    Graph g = testutil::random_graph(15, 4, 0.3, rng);
    GatLayer<double> layer(4, 8, 2, false, 0.0, rng);
    auto ix = detail::attention_index(g);
    auto h = rand_tensor<double>({15, 4}, rng);
    for (const auto& head : layer.heads) {
        auto wh = matmul(h, head.w);
        auto sl = matmul(wh, head.attn_l);
        auto sr = matmul(wh, head.attn_r);
        auto score = leaky_relu(add(gather_rows(sl, ix.dst), gather_rows(sr, ix.src)), 0.2);
        auto alpha = segment_softmax(score, ix.offsets);
        for (std::int64_t v = 0; v < g.n; ++v) {
            double s = 0;
            for (std::int64_t e = ix.offsets[static_cast<std::size_t>(v)]; e < ix.offsets[static_cast<std::size_t>(v + 1)]; ++e)
                s += alpha.values()[static_cast<std::size_t>(e)];
            EXPECT_NEAR(s, 1.0, 1e-6);
        }
    }
}

TEST(GinLayer, IsolatedNodeIsMlpOfOwnFeatures) {
    RngState rng(33);
    Graph g = make_graph(1, 3, {1.0, 2.0, -0.5}, {});
    GinLayer<double> layer(3, 5, rng);
    auto h = Tensor<double>::from_values({1, 3}, {1.0, 2.0, -0.5});
    auto out = layer.forward(h, g);
    auto expect = layer.lin2.forward(prelu(layer.lin1.forward(h), layer.mlp_slope));
    for (std::size_t i = 0; i < out.values().size(); ++i)
        EXPECT_NEAR(out.values()[i], expect.values()[i], 1e-14);
}

TEST(GinLayer, EqualIsolatedNodesGetEqualOutputs) {
    RngState rng(34);
    Graph g = make_graph(2, 2, {0.3, -0.7, 0.3, -0.7}, {});
    GinLayer<double> layer(2, 4, rng);
    auto h = Tensor<double>::from_values({2, 2}, {0.3, -0.7, 0.3, -0.7});
    auto out = layer.forward(h, g);
    for (std::int64_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(out(0, j), out(1, j));
}

// Permutation oracle: relabeling nodes permutes encoder outputs, for both
// layer kinds, across seeds.
TEST(Encoder, PermutationEquivariance) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RngState rng(400 + seed);
        Graph g = testutil::random_graph(20, 5, 0.25, rng);
        auto perm = testutil::random_permutation(20, rng);
        Graph pg = testutil::permute_graph(g, perm);
        for (auto kind : {LayerKind::gat, LayerKind::gin}) {
            RngState init_rng(900 + seed);
            EncoderConfig cfg = kind == LayerKind::gat ? gat_config(8, 2) : gin_config(8);
            Encoder<double> enc(cfg, 5, init_rng);
            RngState r1(0), r2(0);
            auto z = enc.encode(g, 0.0, r1, false).z;
            auto pz = enc.encode(pg, 0.0, r2, false).z;
            for (std::int64_t v = 0; v < 20; ++v)
                for (std::int64_t j = 0; j < 8; ++j)
                    EXPECT_NEAR(z(v, j), pz(perm[static_cast<std::size_t>(v)], j), 1e-9)
                        << to_string(kind) << " seed " << seed;
        }
    }
}

TEST(Encoder, InferenceDeterministicBitwise) {
    RngState rng(36);
    Graph g = testutil::random_graph(12, 4, 0.3, rng);
    RngState init_rng(1);
    Encoder<float> enc(gat_config(8, 2), 4, init_rng);
    RngState r1(5), r2(99);  // rng must not matter at inference
    auto a = enc.encode(g, 0.0, r1, false).z;
    auto b = enc.encode(g, 0.0, r2, false).z;
    EXPECT_EQ(a.values(), b.values());
}

TEST(Encoder, TrainingMasksAndInferenceDoesNot) {
    RngState rng(37);
    Graph g = testutil::random_graph(30, 4, 0.2, rng);
    RngState init_rng(2);
    Encoder<double> enc(gin_config(6), 4, init_rng);
    RngState r1(7);
    auto rep = enc.encode(g, 0.9, r1, true);
    EXPECT_LT(rep.mask.kept_fraction(), 0.6);
    RngState r2(7);
    auto rep_inf = enc.encode(g, 0.9, r2, false);
    EXPECT_DOUBLE_EQ(rep_inf.mask.kept_fraction(), 1.0);
}

// A masked node sends no feature signal: graphs that differ only in a masked
// row encode identically (structure still participates).
TEST(Encoder, MaskedRowsContributeNoFeatureSignal) {
    RngState rng(38);
    Graph g = testutil::random_graph(10, 3, 0.4, rng);
    Graph g2 = g;
    for (std::int64_t j = 0; j < 3; ++j) g2.x[static_cast<std::size_t>(4 * 3 + j)] = 99.0 + static_cast<double>(j);
    for (auto kind : {LayerKind::gat, LayerKind::gin}) {
        RngState init_rng(77);
        EncoderConfig cfg = kind == LayerKind::gat ? gat_config(8, 2) : gin_config(8);
        Encoder<double> enc(cfg, 3, init_rng);
        auto mask_row = [&](const Graph& gr) {
            std::vector<double> f(gr.x.begin(), gr.x.end());
            for (std::int64_t j = 0; j < 3; ++j) f[static_cast<std::size_t>(4 * 3 + j)] = 0.0;
            auto x = Tensor<double>::from_values({gr.n, gr.d}, std::move(f));
            RngState r(0);
            return enc.forward(x, gr, false, r);
        };
        auto za = mask_row(g);
        auto zb = mask_row(g2);
        EXPECT_EQ(za.values(), zb.values()) << to_string(kind);
    }
}

TEST(Readout, SingleNodeGraphEqualsRow) {
    RngState rng(39);
    Graph g = make_graph(1, 2, {3.0, -1.0}, {});
    auto batch = batch_graphs({g});
    RngState init_rng(3);
    Encoder<double> enc(gin_config(4), 2, init_rng);
    auto rep = enc.encode(batch, 0.0, init_rng, false);
    for (std::int64_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(rep.readout(0, j), rep.z(0, j));
}

TEST(Readout, MeanOfIdenticalRowsIsThatRow) {
    auto z = Tensor<double>::from_values({3, 2}, {1.5, -2.0, 1.5, -2.0, 1.5, -2.0});
    auto out = segment_reduce_rows(z, {0, 3}, true);
    EXPECT_DOUBLE_EQ(out(0, 0), 1.5);
    EXPECT_DOUBLE_EQ(out(0, 1), -2.0);
}

// Permutation oracle for the readout: shuffling nodes within a graph leaves
// the pooled representation unchanged.
TEST(Readout, PermutationInvariant) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RngState rng(500 + seed);
        Graph g = testutil::random_graph(14, 3, 0.3, rng);
        auto perm = testutil::random_permutation(14, rng);
        Graph pg = testutil::permute_graph(g, perm);
        RngState init_rng(1000 + seed);
        Encoder<double> enc(gin_config(6), 3, init_rng);
        RngState r1(0), r2(0);
        auto a = enc.encode(batch_graphs({g}), 0.0, r1, false).readout;
        auto b = enc.encode(batch_graphs({pg}), 0.0, r2, false).readout;
        for (std::int64_t j = 0; j < 6; ++j) EXPECT_NEAR(a(0, j), b(0, j), 1e-6);
    }
}

TEST(Encoder, GradientsFlowThroughBothKinds) {
    RngState rng(40);
    Graph g = testutil::random_graph(8, 3, 0.4, rng);
    for (auto kind : {LayerKind::gat, LayerKind::gin}) {
        RngState init_rng(4);
        EncoderConfig cfg = kind == LayerKind::gat ? gat_config(4, 2) : gin_config(4);
        cfg.layers = 2;
        Encoder<double> enc(cfg, 3, init_rng);
        auto params = enc.params();
        auto f = [&]() {
            RngState r(0);
            return sumsq(enc.encode(g, 0.0, r, false).z);
        };
        double err = finite_diff_check(f, tensors_of(params), 1e-5);
        EXPECT_LE(err, 1e-4) << to_string(kind);
    }
}
