#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace otafl {

/// What a random stream is used for. Streams with different purposes never
/// overlap, so e.g. drawing mini-batches cannot perturb the channel draws.
enum class Purpose : std::uint64_t {
    Fading = 1,
    Noise = 2,
    Minibatch = 3,
    Deployment = 4,
    Init = 5,
    Data = 6,
    Partition = 7,
    Scheduler = 8,
    Experiment = 9,
};

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based stream keyed by (seed, purpose, round, index).
///
/// The n-th output is a pure function of the key and n (SplitMix64 output
/// function applied to key + n * golden gamma), so any stream can be
/// recreated at any time from its coordinates alone. This is what gives the
/// harness common random numbers across power-control schemes.
class RngStream {
public:
    RngStream(std::uint64_t seed, Purpose purpose, std::uint64_t round, std::uint64_t index) noexcept
        : key_(derive_key(seed, purpose, round, index)) {}

    static constexpr std::uint64_t derive_key(std::uint64_t seed, Purpose purpose, std::uint64_t round,
                                              std::uint64_t index) noexcept {
        std::uint64_t k = detail::mix64(seed + detail::kGolden);
        k = detail::mix64(k ^ (static_cast<std::uint64_t>(purpose) * detail::kGolden));
        k = detail::mix64(k ^ (round + 0x632BE59BD9B4E019ULL));
        k = detail::mix64(k ^ (index + 0x85157AF5ULL));
        return k;
    }

    std::uint64_t next_u64() noexcept {
        ++counter_;
        return detail::mix64(key_ + counter_ * detail::kGolden);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept {
        // Lemire's multiply-shift; the residual bias is < n / 2^64.
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Pair of independent standard normals (Box-Muller).
    std::complex<double> normal_pair() noexcept {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        return {r * std::cos(theta), r * std::sin(theta)};
    }

    double normal() noexcept { return normal_pair().real(); }

    /// Circularly-symmetric complex Gaussian with E|x|^2 = variance.
    std::complex<double> complex_normal(double variance) noexcept {
        return normal_pair() * std::sqrt(0.5 * variance);
    }

    std::uint64_t key() const noexcept { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace otafl
