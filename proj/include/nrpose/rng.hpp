#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace nrpose {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based generator: the k-th draw of stream s under seed is a pure
/// function of (seed, s, k). Output is identical on every platform, which is
/// not true of the std distributions.
class CounterRng {
public:
    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix64(seed ^ mix64(stream ^ 0x6a09e667f3bcc909ULL))) {}

    constexpr std::uint64_t next_u64() noexcept {
        return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
    }

    /// Uniform on [0, 1) with 53 random bits.
    constexpr double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), unbiased. n must be positive.
    constexpr std::uint64_t uniform_int(std::uint64_t n) noexcept {
        const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
        std::uint64_t r = next_u64();
        while (r >= limit)
            r = next_u64();
        return r % n;
    }

    /// Standard normal via Box-Muller, one value per call.
    double normal() noexcept {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t draws() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace nrpose
