#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace spap {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// SplitMix64 generator. Planning derives thousands of short independent
/// streams per step, so seeding must be cheap; this engine seeds in O(1) and
/// satisfies UniformRandomBitGenerator.
class Rng {
public:
    using result_type = std::uint64_t;
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

/// Seed for an independent stream keyed by a tuple of integers, e.g.
/// (seed, step, action, route, sample). Order matters.
inline std::uint64_t stream_seed(std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = 0x6a09e667f3bcc908ULL;
    for (auto k : keys) h = splitmix64(h ^ splitmix64(k));
    return h;
}

inline Rng make_stream(std::initializer_list<std::uint64_t> keys) { return Rng{stream_seed(keys)}; }

/// Uniform on [0, 1) from the top 53 bits; platform independent, unlike
/// std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

} // namespace spap
