#include <gtest/gtest.h>

#include <cmath>

#include "graffe/decoder.hpp"
#include "graffe/diffusion.hpp"
#include "test_util.hpp"

using namespace graffe;
using testutil::rand_tensor;

namespace {

DecoderConfig mlp_config(std::int64_t depth = 2, std::int64_t base = 16, std::int64_t tw = 8) {
    DecoderConfig cfg;
    cfg.depth = depth;
    cfg.base = base;
    cfg.layer_kind = DecoderLayerKind::mlp;
    cfg.fusion = FusionKind::sum;
    cfg.time_width = tw;
    return cfg;
}

DecoderConfig gnn_config(std::int64_t depth = 2, std::int64_t base = 16, std::int64_t tw = 8) {
    DecoderConfig cfg = mlp_config(depth, base, tw);
    cfg.layer_kind = DecoderLayerKind::gnn;
    cfg.fusion = FusionKind::adanorm;
    return cfg;
}

Tensor<double> find_param(const ParamList<double>& params, const std::string& name) {
    for (const auto& p : params)
        if (p.name == name) return p.tensor;
    throw std::runtime_error("param not found: " + name);
}

}  // namespace

TEST(DecoderConfig, Validation) {
    DecoderConfig cfg = mlp_config(3, 12);  // 12 not divisible by 8
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = mlp_config(2, 16, 7);  // odd time width
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = mlp_config();
    cfg.fusion = FusionKind::adanorm;  // adanorm pairs with gnn
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(TimeEmbed, SincosAtZero) {
    auto emb = sincos_embedding<double>({0}, 8);
    for (int k = 0; k < 4; ++k) {
        EXPECT_DOUBLE_EQ(emb(0, k), 0.0);      // sines
        EXPECT_DOUBLE_EQ(emb(0, 4 + k), 1.0);  // cosines
    }
}

TEST(TimeEmbed, EqualTimestepsEqualRows) {
    RngState rng(41);
    TimeEmbed<double> te(8, rng);
    auto out = te.forward({17, 17, 4});
    for (std::int64_t j = 0; j < 8; ++j) {
        EXPECT_DOUBLE_EQ(out(0, j), out(1, j));
    }
}

TEST(TimeEmbed, AdjacentTimestepsDiffer) {
    RngState rng(42);
    TimeEmbed<double> te(16, rng);
    auto out = te.forward({100, 101});
    double norm = 0;
    for (std::int64_t j = 0; j < 16; ++j) {
        double d = out(0, j) - out(1, j);
        norm += d * d;
    }
    EXPECT_GT(std::sqrt(norm), 0.0);
}

TEST(TimeEmbed, OddWidthRejected) {
    RngState rng(43);
    EXPECT_THROW(TimeEmbed<double>(9, rng), ConfigError);
    EXPECT_THROW(sincos_embedding<double>({1}, 5), ConfigError);
}

TEST(FuseSum, ZeroInitIsIdentity) {
    RngState rng(44);
    FuseSum<double> fuse(8, 6, 10);
    auto h = rand_tensor<double>({5, 10}, rng);
    auto t = rand_tensor<double>({5, 8}, rng);
    auto z = rand_tensor<double>({5, 6}, rng);
    auto out = fuse.forward(h, t, z);
    EXPECT_EQ(out.values(), h.values());
}

TEST(FuseSum, ZeroConditionLeavesTimeTerm) {
    RngState rng(45);
    FuseSum<double> fuse(8, 6, 10);
    for (auto& v : fuse.mlp_t.w.values()) v = rng.next_normal();
    auto h = rand_tensor<double>({4, 10}, rng);
    auto t_emb = rand_tensor<double>({4, 8}, rng);
    auto z0 = Tensor<double>::zeros({4, 6});
    auto out = fuse.forward(h, t_emb, z0);
    auto expect = add(h, fuse.mlp_t.forward(t_emb));
    for (std::size_t i = 0; i < out.values().size(); ++i) EXPECT_DOUBLE_EQ(out.values()[i], expect.values()[i]);
}

// MLP_z is a single linear map, so the z pathway superposes exactly.
TEST(FuseSum, ConditionPathwayIsLinear) {
    RngState rng(46);
    FuseSum<double> fuse(8, 6, 10);
    for (auto& v : fuse.mlp_z.w.values()) v = rng.next_normal();
    auto h = Tensor<double>::zeros({4, 10});
    auto t0 = Tensor<double>::zeros({4, 8});
    auto z1 = rand_tensor<double>({4, 6}, rng);
    auto z2 = rand_tensor<double>({4, 6}, rng);
    auto sum_z = add(scale(z1, 2.0), z2);
    auto lhs = fuse.forward(h, t0, sum_z);
    auto rhs = add(scale(fuse.forward(h, t0, z1), 2.0), fuse.forward(h, t0, z2));
    for (std::size_t i = 0; i < lhs.values().size(); ++i) EXPECT_NEAR(lhs.values()[i], rhs.values()[i], 1e-12);
}

TEST(AdaNorm, DefaultInitIsLayerNorm) {
    RngState rng(47);
    AdaNorm<double> an(8, 6, 10);
    auto h = rand_tensor<double>({5, 10}, rng);
    auto t = rand_tensor<double>({5, 8}, rng);
    auto z = rand_tensor<double>({5, 6}, rng);
    auto out = an.forward(h, t, z);
    auto ln = layer_norm(h);
    for (std::size_t i = 0; i < out.values().size(); ++i) EXPECT_DOUBLE_EQ(out.values()[i], ln.values()[i]);
}

TEST(AdaNorm, ZeroScaleIgnoresInput) {
    RngState rng(48);
    AdaNorm<double> an(8, 6, 10);
    // z projection bias: scale half zero, shift half 3.5
    for (std::int64_t j = 0; j < 10; ++j) {
        an.z_proj.b.values()[static_cast<std::size_t>(j)] = 0.0;
        an.z_proj.b.values()[static_cast<std::size_t>(10 + j)] = 3.5;
    }
    auto h1 = rand_tensor<double>({3, 10}, rng);
    auto h2 = rand_tensor<double>({3, 10}, rng);
    auto t = rand_tensor<double>({3, 8}, rng);
    auto z = rand_tensor<double>({3, 6}, rng);
    auto o1 = an.forward(h1, t, z);
    auto o2 = an.forward(h2, t, z);
    for (std::size_t i = 0; i < o1.values().size(); ++i) {
        EXPECT_DOUBLE_EQ(o1.values()[i], 3.5);
        EXPECT_DOUBLE_EQ(o2.values()[i], 3.5);
    }
}

// Direct recomputation oracle with random projection weights.
TEST(AdaNorm, MatchesDirectRecomputation) {
    RngState rng(49);
    AdaNorm<double> an(4, 3, 5);
    for (auto& v : an.t_proj.w.values()) v = rng.next_normal() * 0.3;
    for (auto& v : an.z_proj.w.values()) v = rng.next_normal() * 0.3;
    const std::int64_t n = 6;
    auto h = rand_tensor<double>({n, 5}, rng);
    auto t = rand_tensor<double>({n, 4}, rng);
    auto z = rand_tensor<double>({n, 3}, rng);
    auto out = an.forward(h, t, z);

    auto ln = layer_norm(h);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < 5; ++j) {
            double ts = an.t_proj.b.values()[static_cast<std::size_t>(j)];
            double tb = an.t_proj.b.values()[static_cast<std::size_t>(5 + j)];
            double zs = an.z_proj.b.values()[static_cast<std::size_t>(j)];
            double zb = an.z_proj.b.values()[static_cast<std::size_t>(5 + j)];
            for (std::int64_t k = 0; k < 4; ++k) {
                ts += t(i, k) * an.t_proj.w(k, j);
                tb += t(i, k) * an.t_proj.w(k, 5 + j);
            }
            for (std::int64_t k = 0; k < 3; ++k) {
                zs += z(i, k) * an.z_proj.w(k, j);
                zb += z(i, k) * an.z_proj.w(k, 5 + j);
            }
            double expect = zs * (ts * ln(i, j) + tb) + zb;
            EXPECT_NEAR(out(i, j), expect, 1e-12);
        }
}

TEST(Unet, OutputShapeMatchesInputAcrossDepths) {
    RngState data_rng(50);
    Graph g = testutil::random_graph(7, 5, 0.4, data_rng);
    auto batch = batch_graphs({g});
    for (std::int64_t depth = 0; depth <= 3; ++depth) {
        for (bool gnn : {false, true}) {
            RngState rng(60 + static_cast<std::uint64_t>(depth));
            DecoderConfig cfg = gnn ? gnn_config(depth, 16) : mlp_config(depth, 16);
            GraphUNet<double> unet(cfg, 5, 6, rng);
            auto x = rand_tensor<double>({7, 5}, data_rng);
            std::vector<std::int64_t> t(7, 3);
            Tensor<double> z = gnn ? rand_tensor<double>({1, 6}, data_rng) : rand_tensor<double>({7, 6}, data_rng);
            auto out = gnn ? unet.forward(x, t, z, batch.merged, &batch.graph_id)
                           : unet.forward(x, t, z, g, nullptr);
            EXPECT_EQ(out.shape(), x.shape());
        }
    }
}

TEST(Unet, DepthZeroIsProjectBlockProject) {
    RngState rng(51);
    DecoderConfig cfg = mlp_config(0, 8);
    GraphUNet<double> unet(cfg, 4, 3, rng);
    RngState data_rng(52);
    Graph g = testutil::random_graph(5, 4, 0.5, data_rng);
    auto x = rand_tensor<double>({5, 4}, data_rng);
    auto z = rand_tensor<double>({5, 3}, data_rng);
    auto out = unet.forward(x, {1, 2, 3, 4, 5}, z, g);
    EXPECT_EQ(out.shape(), x.shape());
}

// Parameter surgery: when every expansive map is zeroed, each expansion sees
// exactly the contracting state, so the whole network reduces to
// out_proj(in_proj(x)).
TEST(Unet, SkipConnectionSurgery) {
    RngState rng(53);
    DecoderConfig cfg = mlp_config(2, 16);
    GraphUNet<double> unet(cfg, 6, 4, rng);
    auto params = unet.params();
    // randomize the output projection so the comparison is non-trivial
    RngState wrng(54);
    auto out_w = find_param(params, "decoder.out_proj.w");
    for (auto& v : out_w.values()) v = wrng.next_normal() * 0.2;
    // zero all expansive-path maps
    for (const auto& p : params)
        if (p.name.find(".expand") != std::string::npos && p.name.find(".map.") != std::string::npos) {
            auto tensor = p.tensor;
            for (auto& v : tensor.values()) v = 0.0;
        }
    // contracting maps must also vanish so the skip state is in_proj alone;
    // here we instead verify the expansion input directly: with zero expand
    // maps and identity fusion the network output is out_proj(skips[0]).
    RngState data_rng(55);
    Graph g = testutil::random_graph(6, 6, 0.4, data_rng);
    auto x = rand_tensor<double>({6, 6}, data_rng);
    auto z = rand_tensor<double>({6, 4}, data_rng);
    auto out = unet.forward(x, {1, 1, 1, 1, 1, 1}, z, g);

    auto in_w = find_param(params, "decoder.in_proj.w");
    auto in_b = find_param(params, "decoder.in_proj.b");
    auto out_b = find_param(params, "decoder.out_proj.b");
    auto skip0 = add_bias(matmul(x, in_w), in_b);
    auto expect = add_bias(matmul(skip0, out_w), out_b);
    for (std::size_t i = 0; i < out.values().size(); ++i)
        EXPECT_NEAR(out.values()[i], expect.values()[i], 1e-12);
}

// mlp-mode decoder acts row-wise: jointly permuting rows of (x_t, t, z)
// permutes the output rows and nothing else.
TEST(Unet, MlpModeIsPerRow) {
    RngState rng(56);
    DecoderConfig cfg = mlp_config(1, 8);
    GraphUNet<double> unet(cfg, 3, 2, rng);
    // give the conditioning pathways non-zero weights
    for (const auto& p : unet.params())
        if (p.name.find("fuse") != std::string::npos && p.name.find(".w") != std::string::npos) {
            auto tensor = p.tensor;
            for (auto& v : tensor.values()) v = rng.next_normal() * 0.1;
        }
    RngState data_rng(57);
    Graph g = testutil::random_graph(5, 3, 0.4, data_rng);
    auto x = rand_tensor<double>({5, 3}, data_rng);
    auto z = rand_tensor<double>({5, 2}, data_rng);
    std::vector<std::int64_t> t{1, 5, 9, 2, 7};
    auto base = unet.forward(x, t, z, g);

    auto perm = testutil::random_permutation(5, data_rng);
    std::vector<double> px(15), pz(10);
    std::vector<std::int64_t> pt(5);
    for (std::int64_t i = 0; i < 5; ++i) {
        pt[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = t[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < 3; ++j) px[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)] * 3 + j)] = x(i, j);
        for (std::int64_t j = 0; j < 2; ++j) pz[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)] * 2 + j)] = z(i, j);
    }
    auto permuted = unet.forward(Tensor<double>::from_values({5, 3}, px), pt,
                                 Tensor<double>::from_values({5, 2}, pz), g);
    for (std::int64_t i = 0; i < 5; ++i)
        for (std::int64_t j = 0; j < 3; ++j)
            EXPECT_NEAR(base(i, j), permuted(perm[static_cast<std::size_t>(i)], j), 1e-12);
}

// gnn-mode decoder is permutation equivariant within each graph.
TEST(Unet, GnnModePermutationEquivariant) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        RngState data_rng(600 + seed);
        Graph g = testutil::random_graph(10, 4, 0.35, data_rng);
        auto perm = testutil::random_permutation(10, data_rng);
        Graph pg = testutil::permute_graph(g, perm);
        RngState rng(700 + seed);
        DecoderConfig cfg = gnn_config(1, 8);
        GraphUNet<double> unet(cfg, 4, 3, rng);
        auto batch = batch_graphs({g});
        auto pbatch = batch_graphs({pg});
        std::vector<double> xv(g.x.begin(), g.x.end()), pxv(pg.x.begin(), pg.x.end());
        auto x = Tensor<double>::from_values({10, 4}, xv);
        auto px = Tensor<double>::from_values({10, 4}, pxv);
        auto z = rand_tensor<double>({1, 3}, data_rng);
        std::vector<std::int64_t> t(10, 6);
        auto base = unet.forward(x, t, z, batch.merged, &batch.graph_id);
        auto permuted = unet.forward(px, t, z, pbatch.merged, &pbatch.graph_id);
        for (std::int64_t i = 0; i < 10; ++i)
            for (std::int64_t j = 0; j < 4; ++j)
                EXPECT_NEAR(base(i, j), permuted(perm[static_cast<std::size_t>(i)], j), 1e-9) << "seed " << seed;
    }
}

// Finite-difference oracle through the composed loss for both modes.
TEST(Unet, DsmLossGradientCheck) {
    RngState data_rng(58);
    Graph g = testutil::random_graph(6, 4, 0.4, data_rng);
    auto batch = batch_graphs({g});
    NoiseSchedule sched(ScheduleKind::linear, 50);
    for (bool gnn : {false, true}) {
        RngState rng(59 + (gnn ? 1 : 0));
        DecoderConfig cfg = gnn ? gnn_config(1, 8) : mlp_config(1, 8);
        GraphUNet<double> unet(cfg, 4, 3, rng);
        auto params = unet.params();
        // make fusion nontrivial so its gradients are exercised
        for (const auto& p : params)
            if (p.name.find("fuse") != std::string::npos && p.name.find(".w") != std::string::npos) {
                auto tensor = p.tensor;
                for (auto& v : tensor.values()) v = rng.next_normal() * 0.1;
            }
        auto x0 = rand_tensor<double>({6, 4}, data_rng);
        std::vector<std::int64_t> t(6, 25);
        RngState nrng(60);
        auto ns = noise(x0.values(), 6, 4, t, sched, nrng);
        auto xt = Tensor<double>::from_values({6, 4}, ns.xt);
        Tensor<double> z = gnn ? rand_tensor<double>({1, 3}, data_rng) : rand_tensor<double>({6, 3}, data_rng);
        auto f = [&]() {
            auto pred = gnn ? unet.forward(xt, t, z, batch.merged, &batch.graph_id)
                            : unet.forward(xt, t, z, g, nullptr);
            return dsm_loss(pred, x0, t);
        };
        double err = finite_diff_check(f, tensors_of(params), 1e-5);
        EXPECT_LE(err, 1e-4) << (gnn ? "gnn" : "mlp");
    }
}
