#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace optosqueeze {

/**
 * Reproducible random stream addressed by (master_seed, stream_index).
 *
 * The engine is xoshiro256** (Blackman & Vigna). Its 256-bit state is filled
 * by a SplitMix64 sequence whose starting point mixes the master seed with the
 * stream index, so every stream is a pure function of the pair and can be
 * created in O(1) on any worker. Normal deviates use the Box-Muller transform
 * on 53-bit uniforms; no standard-library distribution is involved, so output
 * is identical across standard libraries.
 *
 * The algorithm is part of the output contract: changing it changes every
 * Monte Carlo CSV. Bump kAlgorithmVersion if it ever has to change.
 */
class RandomSource {
public:
    using result_type = std::uint64_t;
    static constexpr int kAlgorithmVersion = 1;

    RandomSource(std::uint64_t master_seed, std::uint64_t stream_index);

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_index() const noexcept { return stream_index_; }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return next(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Standard normal deviate.
    double normal() noexcept;

    /// Normal deviate with the given mean and standard deviation.
    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

private:
    result_type next() noexcept;

    std::uint64_t master_seed_;
    std::uint64_t stream_index_;
    std::array<std::uint64_t, 4> s_{};
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

/// SplitMix64 finalizer; exposed for seeding derived quantities.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

}  // namespace optosqueeze
