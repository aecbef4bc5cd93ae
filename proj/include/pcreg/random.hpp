#pragma once

#include <array>
#include <cstdint>

namespace pcreg {

/// SplitMix64 step; used to expand seeds and derive sub-seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// Derives an independent 64-bit seed from a base seed and a stream id.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// xoshiro256** (Blackman & Vigna) seeded through SplitMix64. All derived
/// draws are implemented here rather than with <random> distributions so that
/// sequences are identical on every platform and standard library.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t next();
    result_type operator()() { return next(); }
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n), unbiased (Lemire's multiply-shift with rejection).
    std::uint64_t below(std::uint64_t n);
    /// Standard normal via the Box-Muller transform (one value per call).
    double normal();

private:
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace pcreg
