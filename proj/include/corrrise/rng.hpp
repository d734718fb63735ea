#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace corrrise {

/// SplitMix64 in counter form: draw i (1-based) is mix(key + i * 0x9E3779B97F4A7C15).
///
/// This is the reference SplitMix64 sequence for state = key. uniform01() and below() use only
/// integer arithmetic and one exact scaling, so they reproduce bit-for-bit on any platform and
/// in any language that follows the same recipe (mask stacks depend on nothing else):
///   uniform01    = (next() >> 11) * 2^-53
///   below(n)     = high 64 bits of the 128-bit product next() * n
///   normal()     = Box-Muller on two uniform01 draws (u1 mapped to (0,1]); goes through libm
///                  log/cos, so it is only guaranteed stable for a given toolchain
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t next() { return mix(key_ + (++counter_) * kGamma); }

    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    double normal(double mean, double stddev) {
        const double u1 = 1.0 - uniform01();
        const double u2 = uniform01();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        return mean + stddev * z;
    }

    std::uint64_t counter() const { return counter_; }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Derives an independent key from a parent key and a label.
    static std::uint64_t derive(std::uint64_t key, std::uint64_t label) {
        return mix(key ^ mix(label + kGamma));
    }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace corrrise
