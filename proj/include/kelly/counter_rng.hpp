#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace kelly {

/// Counter-based random streams. Every variate is a pure function of the
/// seed and up to four 64-bit counters, so the generation order (and hence
/// the thread layout) cannot change the result.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Independent sub-stream for a different purpose (simulation, Monte
    /// Carlo expectation, ...). Tags must be distinct per purpose.
    CounterRng derive(std::uint64_t tag) const { return CounterRng(word(tag, 0xd1b54a32d192ed03ULL)); }

    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t word(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                       std::uint64_t d = 0) const {
        std::uint64_t h = mix(seed_ ^ 0x6a09e667f3bcc909ULL);
        h = mix(h ^ a);
        h = mix(h ^ b);
        h = mix(h ^ c);
        return mix(h ^ d);
    }

    /// Uniform draw in the open interval (0, 1).
    double uniform(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                   std::uint64_t d = 0) const {
        return (static_cast<double>(word(a, b, c, d) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal draw identified by up to three counters (Box-Muller,
    /// fourth counter reserved for the two underlying uniforms).
    double normal(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        const double u1 = uniform(a, b, c, 0);
        const double u2 = uniform(a, b, c, 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t seed_;
};

}  // namespace kelly
