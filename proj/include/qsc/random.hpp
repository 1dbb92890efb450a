#pragma once

#include <cstdint>

namespace qsc {

/// SplitMix64 finalizer. Used as a stateless mixing function so that random
/// draws can be addressed by (seed, stream, counter) independently of the
/// order or chunking in which they are evaluated.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_key(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
    return mix64(mix64(mix64(seed) ^ stream) ^ counter);
}

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

constexpr double uniform_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
    return to_unit(hash_key(seed, stream, counter));
}

/// Sequential generator over a keyed stream; satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(mix64(mix64(seed) ^ stream)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    constexpr result_type operator()() noexcept { return mix64(key_ ^ counter_++); }
    constexpr double uniform() noexcept { return to_unit((*this)()); }
    constexpr bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Uniform integer in [0, bound) by Lemire's multiply-shift (bound > 0).
    std::uint64_t below(std::uint64_t bound) noexcept {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * bound) >> 64);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace qsc
