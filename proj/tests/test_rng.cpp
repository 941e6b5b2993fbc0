#include <gtest/gtest.h>

#include <cmath>

#include "graffe/rng.hpp"

using graffe::RngState;

TEST(Rng, IdenticalStateIdenticalSequence) {
    RngState a(42), b(42);
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_uniform(), b.next_uniform());
    EXPECT_EQ(a.counter, b.counter);
}

TEST(Rng, CounterAdvancesByCount) {
    RngState s(7);
    s.normal(13);
    EXPECT_EQ(s.counter, 13u);
    s.bernoulli(0.5, 5);
    EXPECT_EQ(s.counter, 18u);
    s.uniform_int(10, 4);
    EXPECT_EQ(s.counter, 22u);
}

TEST(Rng, ResumingMidStreamMatches) {
    RngState full(99);
    auto first = full.normal(10);
    auto second = full.normal(10);
    (void)first;
    RngState resumed(99, 10);
    auto replay = resumed.normal(10);
    EXPECT_EQ(second, replay);
}

TEST(Rng, BernoulliDegenerateRates) {
    RngState s(3);
    for (auto v : s.bernoulli(0.0, 500)) EXPECT_EQ(v, 0);
    for (auto v : s.bernoulli(1.0, 500)) EXPECT_EQ(v, 1);
}

TEST(Rng, UniformIntRange) {
    RngState s(11);
    for (auto v : s.uniform_int(2, 2000)) EXPECT_LT(v, 2u);
    bool saw[5] = {false, false, false, false, false};
    for (auto v : s.uniform_int(5, 2000)) saw[v] = true;
    for (bool b : saw) EXPECT_TRUE(b);
}

// Statistical oracle: a million standard normal draws should have sample
// mean within 4/sqrt(N) of zero and sample variance within 1% of one.
TEST(Rng, NormalMoments) {
    RngState s(20240601);
    const std::size_t n = 1000000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double v = s.next_normal();
        sum += v;
        sumsq += v * v;
    }
    double mean = sum / static_cast<double>(n);
    double var = sumsq / static_cast<double>(n) - mean * mean;
    EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(var, 1.0, 0.01);
}

TEST(Rng, UniformChiSquare) {
    RngState s(5150);
    const int bins = 20;
    const std::size_t n = 200000;
    std::vector<std::size_t> count(bins, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double u = s.next_uniform();
        int b = std::min(bins - 1, static_cast<int>(u * bins));
        ++count[static_cast<std::size_t>(b)];
    }
    double expected = static_cast<double>(n) / bins;
    double chi2 = 0.0;
    for (auto c : count) {
        double d = static_cast<double>(c) - expected;
        chi2 += d * d / expected;
    }
    // 19 dof, 1% critical value
    EXPECT_LT(chi2, 36.19);
}

TEST(Rng, SplitStreamsDiffer) {
    RngState base(1);
    RngState a = base.split(0), b = base.split(1);
    int equal = 0;
    for (int i = 0; i < 100; ++i)
        if (a.next_uniform() == b.next_uniform()) ++equal;
    EXPECT_EQ(equal, 0);
}
