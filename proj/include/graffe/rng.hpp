#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "graffe/common.hpp"

namespace graffe {

/// Counter-based pseudo-random generator.
///
/// Every draw is a pure function of (seed, counter, lane): the counter is
/// hashed through two rounds of the splitmix64 finalizer, with the lane
/// index folded in between rounds. Draw kinds consume exactly `count`
/// counter positions, so streams can be split, replayed and advanced
/// deterministically on any platform. The algorithm is frozen; changing it
/// invalidates stored checkpoints.
struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t counter = 0;

    RngState() = default;
    explicit RngState(std::uint64_t s, std::uint64_t c = 0) : seed(s), counter(c) {}

    /// Independent substream derived by tagging; used to give workers
    /// disjoint streams without coordinating counters.
    RngState split(std::uint64_t tag) const {
        return RngState(mix(seed ^ mix(tag + 0x632be59bd9b4e019ULL)), 0);
    }

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t raw(std::uint64_t index, std::uint64_t lane) const {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
        z = mix(z) ^ (0xda942042e4dd58b5ULL * (lane + 1));
        return mix(z);
    }

    /// Uniform double in [0, 1), 53 mantissa bits.
    double uniform_at(std::uint64_t index, std::uint64_t lane = 0) const {
        return static_cast<double>(raw(index, lane) >> 11) * 0x1.0p-53;
    }

    double next_uniform() { return uniform_at(counter++); }

    /// Standard normal via Box-Muller; one counter position per draw.
    double normal_at(std::uint64_t index) const {
        double u1 = uniform_at(index, 0);
        double u2 = uniform_at(index, 1);
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double next_normal() { return normal_at(counter++); }

    bool next_bernoulli(double p) { return next_uniform() < p; }

    /// Uniform integer in [0, n) by multiply-shift.
    std::uint64_t next_uniform_int(std::uint64_t n) {
        std::uint64_t r = raw(counter++, 0);
        return static_cast<std::uint64_t>((static_cast<__uint128_t>(r) * n) >> 64);
    }

    std::vector<double> normal(std::size_t count) {
        std::vector<double> out(count);
        for (auto& v : out) v = next_normal();
        return out;
    }

    std::vector<double> uniform(std::size_t count) {
        std::vector<double> out(count);
        for (auto& v : out) v = next_uniform();
        return out;
    }

    std::vector<std::uint8_t> bernoulli(double p, std::size_t count) {
        std::vector<std::uint8_t> out(count);
        for (auto& v : out) v = next_bernoulli(p) ? 1 : 0;
        return out;
    }

    std::vector<std::uint64_t> uniform_int(std::uint64_t n, std::size_t count) {
        std::vector<std::uint64_t> out(count);
        for (auto& v : out) v = next_uniform_int(n);
        return out;
    }
};

}  // namespace graffe
