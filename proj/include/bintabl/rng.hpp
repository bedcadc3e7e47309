#pragma once

#include <cstdint>

namespace bintabl {

/// One step of SplitMix64. Used for seeding and for deriving independent
/// stream seeds from a master seed.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Seed for stream `stream` of master seed `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// xoshiro256** seeded through SplitMix64.
///
/// Draws are fully specified by the seed and independent of the platform's
/// standard library, so identical seeds give bit-identical sequences.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept;
    /// Standard normal via Box-Muller (both variates are used).
    double normal() noexcept;
    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;
    bool bernoulli(double p) noexcept { return uniform() < p; }

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace bintabl
