#pragma once

// Counter-based random streams for reproducible parallel chains.
//
// Every chain owns a stream whose i-th 64-bit word is
//
//     word_i = mix64(key_b ^ mix64(key_a + golden * i))
//
// with (key_a, key_b) derived from (seed, chain index, purpose) by mix64. The
// generator is counter-based: any word can be computed without the ones
// before it, so a chain's noise never depends on how chains are scheduled
// across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace ulakit {

/// SplitMix64 finalizer. Bijective 64-bit mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Key for stream `index` under `seed`: mix64(seed + golden * (index + 1)).
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix64(seed + 0x9E3779B97F4A7C15ULL * (index + 1));
}

namespace detail {

// Marsaglia-Tsang ziggurat tables, 128 layers, in the floating-point layout
// of Doornik (2005).
struct ZigguratTables {
    static constexpr int kLayers = 128;
    static constexpr double kR = 3.442619855899;
    static constexpr double kV = 9.91256303526217e-3;

    std::array<double, kLayers + 1> x{};
    std::array<double, kLayers> ratio{};

    ZigguratTables() {
        double f = std::exp(-0.5 * kR * kR);
        x[0] = kV / f;
        x[1] = kR;
        x[kLayers] = 0.0;
        for (int i = 2; i < kLayers; ++i) {
            x[i] = std::sqrt(-2.0 * std::log(kV / x[i - 1] + f));
            f = std::exp(-0.5 * x[i] * x[i]);
        }
        for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
    }
};

inline const ZigguratTables kZiggurat{};

}  // namespace detail

/// One reproducible random stream. Satisfies UniformRandomBitGenerator.
class RandomStream {
public:
    using result_type = std::uint64_t;

    /// `purpose` separates streams that share (seed, index), e.g. chain noise
    /// vs. projection directions.
    RandomStream(std::uint64_t seed, std::uint64_t index, std::uint32_t purpose = 0) noexcept
        : key_a_(derive_key(seed, index)),
          key_b_(mix64(key_a_ ^ (0xD1B54A32D192ED03ULL * (std::uint64_t{purpose} + 1)))) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return next_u64(); }

    std::uint64_t next_u64() noexcept { return word_at(counter_++); }

    /// The word that the (position+1)-th call to next_u64 returns; does not
    /// advance the stream.
    std::uint64_t word_at(std::uint64_t position) const noexcept {
        return mix64(key_b_ ^ mix64(key_a_ + 0x9E3779B97F4A7C15ULL * position));
    }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1p-53; }

    /// Uniform on (0, 1]; safe to take the logarithm of.
    double uniform_pos() noexcept { return static_cast<double>((next_u64() >> 11) + 1) * 0x1p-53; }

    /// Standard normal variate (ziggurat, exact).
    double normal() noexcept {
        const auto& z = detail::kZiggurat;
        for (;;) {
            const std::uint64_t w = next_u64();
            const int layer = static_cast<int>(w & 0x7F);
            const double u = 2.0 * (static_cast<double>(w >> 11) * 0x1p-53) - 1.0;
            if (std::fabs(u) < z.ratio[layer]) return u * z.x[layer];
            if (layer == 0) return tail(u < 0.0);
            const double x = u * z.x[layer];
            const double f0 = std::exp(-0.5 * (z.x[layer] * z.x[layer] - x * x));
            const double f1 = std::exp(-0.5 * (z.x[layer + 1] * z.x[layer + 1] - x * x));
            if (f1 + uniform() * (f0 - f1) < 1.0) return x;
        }
    }

    std::uint64_t words_consumed() const noexcept { return counter_; }

private:
    double tail(bool negative) noexcept {
        constexpr double r = detail::ZigguratTables::kR;
        double x = 0.0;
        double y = 0.0;
        do {
            x = std::log(uniform_pos()) / r;
            y = std::log(uniform_pos());
        } while (-2.0 * y < x * x);
        return negative ? x - r : r - x;
    }

    std::uint64_t key_a_;
    std::uint64_t key_b_;
    std::uint64_t counter_ = 0;
};

/// Stream purposes. Values are part of the reproducibility contract.
namespace stream_purpose {
inline constexpr std::uint32_t kChainNoise = 0;
inline constexpr std::uint32_t kProjection = 1;
inline constexpr std::uint32_t kReference = 2;
inline constexpr std::uint32_t kProbe = 3;
inline constexpr std::uint32_t kDataset = 4;
inline constexpr std::uint32_t kOracle = 5;
}  // namespace stream_purpose

}  // namespace ulakit
