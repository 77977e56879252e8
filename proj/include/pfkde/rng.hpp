#pragma once

#include <cmath>
#include <cstdint>

namespace pfkde {

// Splittable counter-style PRNG built on the splitmix64 finalizer.
//
// Every randomized operation in the library takes one of these streams
// explicitly; there is no global generator. A stream remembers the seed it
// was constructed from, and derive(key) produces an independent child stream
// as a pure function of (seed, key). Replications, particles and time steps
// therefore get reproducible, non-overlapping randomness from a single user
// seed, and two runs with the same seed are bit-identical.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Standard normal via Box-Muller; the second variate of each pair is
    // cached so consecutive calls consume uniforms at a fixed rate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Independent child stream keyed by `key`. Uses the original seed, not
    // the mutable state, so the result does not depend on how much of this
    // stream has already been consumed.
    SplitMix64 derive(std::uint64_t key) const {
        std::uint64_t z = seed_ ^ (0x9E3779B97F4A7C15ull * (key + 0x632BE59BD9B4E019ull));
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        z ^= (z >> 31);
        return SplitMix64(z);
    }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

using RngStream = SplitMix64;

} // namespace pfkde
