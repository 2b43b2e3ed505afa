#pragma once

#include <cstdint>
#include <random>

namespace pmn {

/// Seeded random source with platform-independent derived distributions.
///
/// std::mt19937_64 is fully specified by the standard, but the std
/// distributions are not; the helpers here fix the algorithms so that a
/// seed produces the same stream everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Derives a child seed from a parent seed and a key (splitmix64 finalizer).
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t key);

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();

    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller.
    double normal();

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

}  // namespace pmn
