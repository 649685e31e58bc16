#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace emx {

/* Deterministic RNG used everywhere randomness is needed.
 *
 * splitmix64 is both the mixer and the engine: output sequences are fully
 * specified by this file, so results do not depend on libstdc++'s
 * distribution internals. derive() builds independent sub-streams from a
 * master seed and a tuple of tags (e.g. student index, day, purpose), so
 * adding one more student never perturbs the draws of the others.
 */

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = seed ^ 0xd1b54a32d192ed03ULL;
    splitmix64(s);
    for (std::uint64_t t : tags) {
        s ^= t + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
        splitmix64(s);
    }
    return s;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds
        splitmix64(state_);
    }

    static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
        return Rng(mix_seed(seed, tags));
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1) with 53-bit resolution
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [-1, 1]
    double uniform_pm1() { return uniform01() * 2.0 - 1.0; }

    // uniform integer in [lo, hi], inclusive; debiased by rejection
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(next_u64()); // full 64-bit range
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return lo + static_cast<std::int64_t>(v % span);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Box-Muller, no spare caching so call order alone fixes the stream
    double normal(double mean, double stddev) {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t state_;
};

} // namespace emx
