#include <gtest/gtest.h>

#include <cmath>

#include "graffe/diffusion.hpp"
#include "test_util.hpp"

using namespace graffe;

namespace {
const ScheduleKind kKinds[] = {ScheduleKind::linear, ScheduleKind::quad, ScheduleKind::sigmoid,
                               ScheduleKind::inverted};
}

TEST(Schedule, VarancePreservingIdentityAndMonotone) {
    for (auto kind : kKinds) {
        for (std::int64_t t_count : {10, 100, 1000}) {
            NoiseSchedule s(kind, t_count);
            double worst = 0.0;
            for (std::int64_t t = 1; t <= t_count; ++t) {
                double a = s.alpha(t), sg = s.sigma(t);
                worst = std::max(worst, std::abs(a * a + sg * sg - 1.0));
                if (t > 1) {
                    EXPECT_LT(a, s.alpha(t - 1)) << to_string(kind) << " T=" << t_count << " t=" << t;
                    EXPECT_GT(sg, s.sigma(t - 1)) << to_string(kind) << " T=" << t_count << " t=" << t;
                }
            }
            EXPECT_LE(worst, 1e-12) << to_string(kind) << " T=" << t_count;
            EXPECT_GE(s.alpha(1), 0.999) << to_string(kind) << " T=" << t_count;
            EXPECT_LE(s.alpha(t_count), 0.05) << to_string(kind) << " T=" << t_count;
        }
    }
}

// Product-formula oracle: recompute alpha_bar for the linear schedule
// directly from its beta ramp.
TEST(Schedule, LinearMatchesBetaProduct) {
    const std::int64_t t_count = 1000;
    NoiseSchedule s(ScheduleKind::linear, t_count);
    double prod = 1.0;
    for (std::int64_t t = 1; t <= t_count; ++t) {
        double beta = 1e-4 + (0.02 - 1e-4) * static_cast<double>(t - 1) / static_cast<double>(t_count - 1);
        prod *= 1.0 - beta;
        EXPECT_NEAR(s.alpha_bar(t), prod, 1e-15);
    }
    EXPECT_NEAR(s.alpha_bar(1), 1.0 - 1e-4, 1e-15);
    EXPECT_NEAR(s.alpha(1), std::sqrt(0.9999), 1e-15);
    EXPECT_NEAR(s.sigma(1), 1e-2, 1e-12);
}

TEST(Schedule, QuadMatchesStatedFormula) {
    const std::int64_t t_count = 1000;
    NoiseSchedule s(ScheduleKind::quad, t_count);
    double prod = 1.0;
    const double r0 = std::sqrt(1e-4), r1 = std::sqrt(0.02);
    for (std::int64_t t = 1; t <= t_count; ++t) {
        double r = r0 + (r1 - r0) * static_cast<double>(t - 1) / static_cast<double>(t_count - 1);
        prod *= 1.0 - r * r;
        EXPECT_NEAR(s.alpha_bar(t), prod, 1e-15);
    }
}

// The inverted curve is the affinely rescaled complement of the reversed
// sigmoid curve; recompute the construction from the sigmoid array.
TEST(Schedule, InvertedIsRescaledComplementOfSigmoid) {
    const std::int64_t t_count = 500;
    NoiseSchedule sig(ScheduleKind::sigmoid, t_count);
    NoiseSchedule inv(ScheduleKind::inverted, t_count);
    const double hi = sig.alpha_bar(1), lo = sig.alpha_bar(t_count);
    std::vector<double> raw(static_cast<std::size_t>(t_count));
    for (std::int64_t t = 1; t <= t_count; ++t)
        raw[static_cast<std::size_t>(t - 1)] = 1.0 - sig.alpha_bar(t_count - t + 1);
    const double rhi = raw.front(), rlo = raw.back();
    for (std::int64_t t = 1; t <= t_count; ++t) {
        double expect = lo + (hi - lo) * (raw[static_cast<std::size_t>(t - 1)] - rlo) / (rhi - rlo);
        EXPECT_NEAR(inv.alpha_bar(t), expect, 1e-12);
    }
}

TEST(Schedule, BadArgs) {
    EXPECT_THROW(NoiseSchedule(ScheduleKind::linear, 1), ConfigError);
    EXPECT_THROW(schedule_kind_from_string("cosine"), ConfigError);
    NoiseSchedule s(ScheduleKind::linear, 10);
    EXPECT_THROW(s.alpha(0), ConfigError);
    EXPECT_THROW(s.alpha(11), ConfigError);
}

TEST(Timesteps, PerGraphSharesDraw) {
    RngState rng(21);
    Graph a = testutil::random_graph(4, 2, 0.5, rng);
    Graph b = testutil::random_graph(3, 2, 0.5, rng);
    auto batch = batch_graphs({a, b});
    NoiseSchedule s(ScheduleKind::linear, 1000);
    auto before = rng.counter;
    auto t = sample_timesteps_per_graph(s, batch, rng);
    EXPECT_EQ(rng.counter, before + 2);  // exactly two draw events
    EXPECT_EQ(t[0], t[1]);
    EXPECT_EQ(t[0], t[3]);
    EXPECT_EQ(t[4], t[5]);
    EXPECT_EQ(t[4], t[6]);
}

TEST(Timesteps, RangeRespectsSmallT) {
    RngState rng(22);
    NoiseSchedule s(ScheduleKind::linear, 2);
    auto t = sample_timesteps_per_node(s, 500, rng);
    for (auto v : t) {
        EXPECT_GE(v, 1);
        EXPECT_LE(v, 2);
    }
}

// Chi-square uniformity oracle at the 1% level (999 dof).
TEST(Timesteps, PerNodeUniform) {
    RngState rng(23);
    NoiseSchedule s(ScheduleKind::linear, 1000);
    const std::int64_t n = 100000;
    auto t = sample_timesteps_per_node(s, n, rng);
    std::vector<double> count(1000, 0.0);
    for (auto v : t) count[static_cast<std::size_t>(v - 1)] += 1.0;
    double expected = static_cast<double>(n) / 1000.0;
    double chi2 = 0.0;
    for (double c : count) chi2 += (c - expected) * (c - expected) / expected;
    EXPECT_LT(chi2, 1106.0);
}

TEST(Noise, ZeroEpsGivesScaledClean) {
    NoiseSchedule s(ScheduleKind::linear, 100);
    std::vector<double> x0{1.0, -2.0, 0.5, 3.0};
    std::vector<std::int64_t> t{7, 93};
    auto ns = noise_with_eps(x0, 2, 2, t, s, std::vector<double>(4, 0.0));
    for (std::int64_t i = 0; i < 2; ++i)
        for (std::int64_t j = 0; j < 2; ++j)
            EXPECT_DOUBLE_EQ(ns.xt[static_cast<std::size_t>(i * 2 + j)],
                             s.alpha(t[static_cast<std::size_t>(i)]) * x0[static_cast<std::size_t>(i * 2 + j)]);
}

TEST(Noise, ZeroCleanGivesScaledEps) {
    NoiseSchedule s(ScheduleKind::quad, 100);
    RngState rng(24);
    std::vector<double> x0(6, 0.0);
    std::vector<std::int64_t> t{1, 50, 100};
    auto ns = noise(x0, 3, 2, t, s, rng);
    for (std::int64_t i = 0; i < 3; ++i)
        for (std::int64_t j = 0; j < 2; ++j) {
            auto idx = static_cast<std::size_t>(i * 2 + j);
            EXPECT_DOUBLE_EQ(ns.xt[idx], s.sigma(t[static_cast<std::size_t>(i)]) * ns.eps[idx]);
        }
}

TEST(Noise, NearCleanAtFirstTimestep) {
    NoiseSchedule s(ScheduleKind::linear, 1000);
    RngState rng(25);
    const std::int64_t n = 50, d = 8;
    std::vector<double> x0(static_cast<std::size_t>(n * d));
    for (auto& v : x0) v = rng.next_normal();
    std::vector<std::int64_t> t(static_cast<std::size_t>(n), 1);
    auto ns = noise(x0, n, d, t, s, rng);
    double diff = 0.0, eps_norm = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        diff += (ns.xt[i] - x0[i]) * (ns.xt[i] - x0[i]);
        eps_norm += ns.eps[i] * ns.eps[i];
    }
    // sigma_1 = 1e-2 exactly for the linear reference schedule; alpha_1 shrinks
    // x0 by <= 1e-4 relative so the bound has slack
    EXPECT_LE(std::sqrt(diff), 1.05e-2 * std::sqrt(eps_norm) + 1e-4 * std::sqrt(static_cast<double>(n * d)) * 4.0);
}

// Empirical moment oracle over many draws: E[x_t|x0] = alpha_t x0 and
// Var[x_t|x0] = sigma_t^2 within three standard errors.
TEST(Noise, ConditionalMoments) {
    NoiseSchedule s(ScheduleKind::sigmoid, 1000);
    RngState rng(26);
    const int reps = 100000;
    const std::int64_t t = 400;
    const double x0 = 1.7;
    double sum = 0.0, sumsq = 0.0;
    std::vector<double> x{x0};
    for (int r = 0; r < reps; ++r) {
        auto ns = noise(x, 1, 1, {t}, s, rng);
        sum += ns.xt[0];
        sumsq += ns.xt[0] * ns.xt[0];
    }
    double mean = sum / reps;
    double var = sumsq / reps - mean * mean;
    double se_mean = s.sigma(t) / std::sqrt(static_cast<double>(reps));
    double se_var = s.sigma(t) * s.sigma(t) * std::sqrt(2.0 / reps);
    EXPECT_NEAR(mean, s.alpha(t) * x0, 3.0 * se_mean);
    EXPECT_NEAR(var, s.sigma(t) * s.sigma(t), 3.0 * se_var);
}

TEST(DsmLoss, PerfectPredictionIsZero) {
    auto x0 = Tensor<double>::from_values({3, 2}, {1, 2, 3, 4, 5, 6});
    auto loss = dsm_loss(x0, x0, {1, 2, 3});
    EXPECT_DOUBLE_EQ(loss.item(), 0.0);
}

TEST(DsmLoss, UnitOffsetGivesFeatureWidth) {
    const std::int64_t n = 4, d = 7;
    std::vector<double> base(static_cast<std::size_t>(n * d), 0.5);
    auto x0 = Tensor<double>::from_values({n, d}, base);
    for (auto& v : base) v += 1.0;
    auto pred = Tensor<double>::from_values({n, d}, base);
    auto loss = dsm_loss(pred, x0, std::vector<std::int64_t>(static_cast<std::size_t>(n), 5));
    EXPECT_DOUBLE_EQ(loss.item(), static_cast<double>(d));
}

// Direct recomputation oracle for a random case, with a lambda table.
TEST(DsmLoss, MatchesDirectRecomputation) {
    RngState rng(27);
    const std::int64_t n = 9, d = 5;
    auto pred = testutil::rand_tensor<double>({n, d}, rng);
    auto x0 = testutil::rand_tensor<double>({n, d}, rng);
    LambdaTable lambda;
    lambda.values.resize(100);
    for (auto& v : lambda.values) v = 0.5 + rng.next_uniform();
    std::vector<std::int64_t> t;
    for (std::int64_t i = 0; i < n; ++i) t.push_back(1 + static_cast<std::int64_t>(rng.next_uniform_int(100)));

    double expect = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            double dd = pred(i, j) - x0(i, j);
            row += dd * dd;
        }
        expect += lambda.values[static_cast<std::size_t>(t[static_cast<std::size_t>(i)] - 1)] * row;
    }
    expect /= static_cast<double>(n);
    EXPECT_NEAR(dsm_loss(pred, x0, t, lambda).item(), expect, 1e-12);
    EXPECT_NEAR(dsm_loss_value(pred.values(), x0.values(), n, d, t, lambda), expect, 1e-12);
}

TEST(DsmLoss, RowPermutationInvariant) {
    RngState rng(28);
    const std::int64_t n = 12, d = 3;
    auto pred = testutil::rand_tensor<double>({n, d}, rng);
    auto x0 = testutil::rand_tensor<double>({n, d}, rng);
    std::vector<std::int64_t> t;
    for (std::int64_t i = 0; i < n; ++i) t.push_back(1 + static_cast<std::int64_t>(rng.next_uniform_int(50)));
    LambdaTable lambda;
    lambda.values.assign(50, 0.0);
    for (auto& v : lambda.values) v = rng.next_uniform();
    double base = dsm_loss(pred, x0, t, lambda).item();

    auto perm = testutil::random_permutation(n, rng);
    std::vector<double> pv(pred.values().size()), xv(x0.values().size());
    std::vector<std::int64_t> tp(t.size());
    for (std::int64_t i = 0; i < n; ++i) {
        tp[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = t[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < d; ++j) {
            pv[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)] * d + j)] = pred(i, j);
            xv[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)] * d + j)] = x0(i, j);
        }
    }
    double permuted = dsm_loss(Tensor<double>::from_values({n, d}, pv), Tensor<double>::from_values({n, d}, xv), tp, lambda).item();
    EXPECT_NEAR(base, permuted, 1e-12);
}

TEST(DsmLoss, ShapeMismatchRejected) {
    auto a = Tensor<double>::zeros({2, 3});
    auto b = Tensor<double>::zeros({3, 2});
    EXPECT_THROW(dsm_loss(a, b, {1, 2}), ShapeError);
}

TEST(Schedule, SdeCoefficientsFiniteAndSigned) {
    for (auto kind : kKinds) {
        NoiseSchedule s(kind, 100);
        for (std::int64_t t = 1; t <= 100; ++t) {
            EXPECT_TRUE(std::isfinite(s.sde_f(t)));
            EXPECT_TRUE(std::isfinite(s.sde_g2(t)));
            EXPECT_LE(s.sde_f(t), 0.0);  // alpha decreases
        }
    }
}
