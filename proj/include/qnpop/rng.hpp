#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace qnpop {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11 constants).
// A block is keyed by (counter, key); streams never touch shared state, so
// replicas seeded as (master_seed, stream_id) are reproducible independent of
// thread count or evaluation order.
struct Philox4x32 {
    static constexpr uint32_t M0 = 0xD2511F53u;
    static constexpr uint32_t M1 = 0xCD9E8D57u;
    static constexpr uint32_t W0 = 0x9E3779B9u; // golden-ratio Weyl increment
    static constexpr uint32_t W1 = 0xBB67AE85u;

    static std::array<uint32_t, 4> block(std::array<uint32_t, 4> ctr,
                                         std::array<uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const uint64_t p0 = static_cast<uint64_t>(M0) * ctr[0];
            const uint64_t p1 = static_cast<uint64_t>(M1) * ctr[2];
            const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
            const uint32_t lo0 = static_cast<uint32_t>(p0);
            const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
            const uint32_t lo1 = static_cast<uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += W0;
            key[1] += W1;
        }
        return ctr;
    }
};

// Buffered stream view over Philox blocks. The 128-bit counter is laid out as
// (block_lo, block_hi, stream_lo, stream_hi); the key carries the master seed.
class RngStream {
  public:
    RngStream() : RngStream(0, 0) {}
    RngStream(uint64_t seed, uint64_t stream)
        : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
          stream_lo_(static_cast<uint32_t>(stream)),
          stream_hi_(static_cast<uint32_t>(stream >> 32)) {}

    uint64_t next_u64() {
        if (pos_ >= 2) refill();
        return buf_[pos_++];
    }

    // uniform in [0,1), 53-bit mantissa
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in (0,1]
    double uniform_pos() { return 1.0 - uniform(); }

    double exponential() { return -std::log(uniform_pos()); }

    // Box-Muller; caches the second variate.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    uint64_t integer_below(uint64_t n) {
        // modulo is fine here: n is tiny compared to 2^64
        return next_u64() % n;
    }

  private:
    void refill() {
        const auto out = Philox4x32::block(
            {static_cast<uint32_t>(block_), static_cast<uint32_t>(block_ >> 32),
             stream_lo_, stream_hi_},
            key_);
        buf_[0] = (static_cast<uint64_t>(out[1]) << 32) | out[0];
        buf_[1] = (static_cast<uint64_t>(out[3]) << 32) | out[2];
        ++block_;
        pos_ = 0;
    }

    std::array<uint32_t, 2> key_;
    uint32_t stream_lo_, stream_hi_;
    uint64_t block_ = 0;
    uint64_t buf_[2] = {0, 0};
    int pos_ = 2;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace qnpop
