#pragma once

// Counter-based randomization streams (Philox4x32-10, Salmon et al. 2011).
//
// A stream is addressed by (seed, stream_id, lane). The 128-bit Philox counter
// is laid out as [block index, lane, stream_id lo, stream_id hi] and the key is
// the 64-bit seed, so any two distinct addresses produce disjoint, independent
// sequences and every draw is reproducible on any platform.

#include <array>
#include <cstdint>
#include <stdexcept>

namespace otm {

namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

constexpr Counter round(const Counter& ctr, const Key& key) noexcept
{
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

/// Philox4x32 with 10 rounds.
constexpr Counter philox4x32_10(Counter ctr, Key key) noexcept
{
    for (int r = 0; r < 10; ++r) {
        if (r > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        ctr = round(ctr, key);
    }
    return ctr;
}

}  // namespace philox

/// Single-owner stream of U[0,1) draws.
class RandomizationStream {
public:
    RandomizationStream(std::uint64_t seed, std::uint64_t stream_id, std::uint32_t lane = 0) noexcept
        : seed_(seed), stream_id_(stream_id), lane_(lane)
    {
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    std::uint32_t lane() const noexcept { return lane_; }

    /// A fresh stream with the same (seed, stream_id) on a different lane.
    RandomizationStream lane_stream(std::uint32_t lane) const noexcept
    {
        return RandomizationStream(seed_, stream_id_, lane);
    }

    std::uint64_t next_u64()
    {
        if (buffered_ == 0) refill();
        const std::uint64_t out = (static_cast<std::uint64_t>(block_[4 - 2 * buffered_]) << 32) |
                                  block_[5 - 2 * buffered_];
        --buffered_;
        return out;
    }

    /// Uniform draw in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double operator()() { return uniform(); }

private:
    void refill()
    {
        if (block_index_ == UINT32_MAX) throw std::length_error("randomization stream exhausted");
        const philox::Counter ctr{block_index_, lane_, static_cast<std::uint32_t>(stream_id_),
                                  static_cast<std::uint32_t>(stream_id_ >> 32)};
        const philox::Key key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
        block_ = philox::philox4x32_10(ctr, key);
        ++block_index_;
        buffered_ = 2;
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint32_t lane_;
    std::uint32_t block_index_ = 0;
    int buffered_ = 0;
    philox::Counter block_{};
};

inline constexpr std::uint64_t kDefaultSeed = 42;

}  // namespace otm
