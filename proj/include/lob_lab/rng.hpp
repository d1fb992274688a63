#pragma once

#include <cstdint>

#include <boost/random/normal_distribution.hpp>

namespace lob_lab {

/// Counter-based generator: the k-th output of a stream is a pure function of
/// (key, k), so per-path streams give identical draws in serial and parallel
/// runs. Output function is the SplitMix64 finalizer.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(mix(seed) ^ (stream * kStreamMul + kGolden))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() { return mix(key_ + (++counter_) * kGolden); }

    /// Uniform in (0, 1).
    double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    std::uint64_t counter() const { return counter_; }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
    static constexpr std::uint64_t kStreamMul = 0xD1B54A32D192ED03ull;

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Standard normal draws (ziggurat) from a CounterRng stream.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream) : rng_(seed, stream) {}

    double operator()() { return dist_(rng_); }

private:
    CounterRng rng_;
    boost::random::normal_distribution<double> dist_;
};

}  // namespace lob_lab
