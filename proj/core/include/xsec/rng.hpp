#pragma once

#include <cmath>
#include <cstdint>

namespace xsec {

// Deterministic, platform-independent random stream (splitmix64 core).
// std::<random> distributions are not bit-stable across standard library
// implementations; every seeded contract in this library goes through Rng
// so "same seed, same bytes" holds everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // Per-sample stream: results must not depend on evaluation order, so
    // sample k always draws from derive(seed, k).
    static Rng derive(std::uint64_t seed, std::uint64_t index) {
        return Rng(seed ^ (0x9e3779b97f4a7c15ULL + index * 0xbf58476d1ce4e5b9ULL));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Standard normal via Box-Muller; one value per call, no cached spare,
    // so consumption is position-independent.
    double normal() {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Uniform integer in [0, n); n > 0. Modulo bias is < 2^-53 for any n
    // this library draws (counts, indices), accepted for determinism.
    std::uint64_t below(std::uint64_t n) {
        return next_u64() % n;
    }

private:
    std::uint64_t state_;
};

} // namespace xsec
