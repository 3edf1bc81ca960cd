#pragma once

// Counter-based random number generation (Philox4x32-10, Salmon et al. 2011).
//
// Every trajectory owns a private stream addressed by (base_seed, stream_id).
// Draws are a pure function of (key, counter), so the i-th trajectory produces
// the same numbers no matter which worker thread runs it or in which order --
// this is what makes ensemble output bit-reproducible for any worker count.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qfilt {

struct Philox4x32Block {
    std::uint32_t x[4];
};

// One 4x32 Philox block: 10 rounds over a 128-bit counter with a 64-bit key.
inline Philox4x32Block philox4x32(const std::uint32_t counter[4],
                                  const std::uint32_t key[2]) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;  // key schedule

    std::uint32_t c0 = counter[0], c1 = counter[1], c2 = counter[2], c3 = counter[3];
    std::uint32_t k0 = key[0], k1 = key[1];
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t(M0) * c0;
        const std::uint64_t p1 = std::uint64_t(M1) * c2;
        const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
        const std::uint32_t hi1 = std::uint64_t(p1) >> 32, lo1 = std::uint32_t(p1);
        c0 = hi1 ^ c1 ^ k0;
        c1 = lo1;
        c2 = hi0 ^ c3 ^ k1;
        c3 = lo0;
        k0 += W0;
        k1 += W1;
    }
    return {{c0, c1, c2, c3}};
}

// Stream of uniforms/gaussians drawn from one Philox stream.
//
// Layout: key = base seed, counter = (position lo, position hi, stream lo,
// stream hi).  2^64 independent streams, each 2^64 blocks long.
class CounterRng {
public:
    CounterRng(std::uint64_t base_seed, std::uint64_t stream_id)
        : key_{std::uint32_t(base_seed), std::uint32_t(base_seed >> 32)},
          stream_lo_(std::uint32_t(stream_id)),
          stream_hi_(std::uint32_t(stream_id >> 32)) {}

    std::uint64_t next_u64() {
        if (lane_ >= 4) refill();
        const std::uint64_t lo = block_.x[lane_];
        const std::uint64_t hi = block_.x[lane_ + 1];
        lane_ += 2;
        return lo | (hi << 32);
    }

    // Uniform on [0,1) with 53 random bits.
    double next_double() {
        return double(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; always consumes exactly two uniforms
    // (no caching) so the draw count per step is fixed.
    double next_gaussian() {
        const double u = 1.0 - next_double();  // (0,1], safe for log
        const double v = next_double();
        return std::sqrt(-2.0 * std::log(u)) *
               std::cos(2.0 * std::numbers::pi * v);
    }

private:
    void refill() {
        const std::uint32_t counter[4] = {std::uint32_t(position_),
                                          std::uint32_t(position_ >> 32),
                                          stream_lo_, stream_hi_};
        block_ = philox4x32(counter, key_);
        ++position_;
        lane_ = 0;
    }

    std::uint32_t key_[2];
    std::uint32_t stream_lo_, stream_hi_;
    std::uint64_t position_ = 0;
    Philox4x32Block block_{};
    int lane_ = 4;  // force refill on first draw
};

// The one place that maps (ensemble seed, trajectory index) to a stream.
inline CounterRng make_trajectory_rng(std::uint64_t base_seed,
                                      std::uint64_t trajectory_index) {
    return CounterRng(base_seed, trajectory_index);
}

}  // namespace qfilt
