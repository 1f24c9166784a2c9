#ifndef SPARQ_RNG_HPP
#define SPARQ_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace sparq {

/// Seeded random stream with an explicit substream id and a draw counter.
///
/// Episodes derive disjoint streams from (seed, substream): environment
/// sampling uses substream 0, expert queries 1, DPP chains 2, tuning 3.
/// Every public draw consumes a fixed number of engine words, so replaying
/// a (seed, substream) pair reproduces a run word for word.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t substream = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                          static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(substream & 0xffffffffu),
                          static_cast<std::uint32_t>(substream >> 32)};
        engine_.seed(seq);
    }

    /// Uniform double in [0, 1) with 53 random bits. One engine word.
    double uniform() {
        ++draws_;
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller. Always two engine words, no caching.
    double gaussian() {
        ++draws_;
        const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform index in [0, n). One engine word (multiply-shift, bias < n/2^64).
    std::size_t uniform_index(std::size_t n) {
        ++draws_;
        const auto x = engine_();
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(x) * static_cast<unsigned __int128>(n)) >> 64);
    }

    /// Number of draws consumed so far (one per call, any kind).
    std::uint64_t draws() const { return draws_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t draws_ = 0;
};

} // namespace sparq

#endif
