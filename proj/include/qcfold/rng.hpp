#pragma once

// Seedable, splittable random streams. Each stream is identified by
// (seed, index) so Monte Carlo results do not depend on scheduling or on the
// standard library's distribution implementations.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace qcfold {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class SplitStream {
public:
    using result_type = std::uint64_t;

    SplitStream(std::uint64_t seed, std::uint64_t index)
        : engine_(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL))) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// True with probability p (to 2^-64 resolution).
    bool bernoulli(double p) {
        if (p >= 1.0) return true;
        if (p <= 0.0) return false;
        const auto threshold = static_cast<std::uint64_t>(std::ldexp(p, 64));
        return engine_() < threshold;
    }

    /// Area-uniform point in the unit disk.
    std::pair<double, double> in_unit_disk() {
        const double r = std::sqrt(uniform());
        const double th = 2.0 * std::numbers::pi * uniform();
        return {r * std::cos(th), r * std::sin(th)};
    }

    SplitStream split(std::uint64_t index) { return SplitStream(engine_(), index); }

private:
    std::mt19937_64 engine_;
};

/// Radical inverse in base `base`; building block for Halton darts.
inline double radical_inverse(std::uint64_t i, unsigned base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

} // namespace qcfold
