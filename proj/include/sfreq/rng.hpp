#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace sfreq {

// Counter-based generator (Philox-4x32-10). Every random quantity in the
// toolkit is drawn from a stream identified by (seed, stream id), so records,
// epochs and workers can draw independently without sharing mutable state:
// stream k of seed s always yields the same values, no matter which thread or
// in which order streams are consumed.
class Philox {
public:
    using Block = std::array<std::uint32_t, 4>;

    Philox(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          base_{static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    // 10-round block function; `block` is the position along the stream.
    Block operator()(std::uint64_t block) const {
        std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(block),
                                         static_cast<std::uint32_t>(block >> 32), base_[0], base_[1]};
        std::uint32_t k0 = key_[0], k1 = key_[1];
        for (int round = 0; round < 10; ++round) {
            ctr = bumble(ctr, k0, k1);
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        return ctr;
    }

private:
    static Block bumble(const Block& c, std::uint32_t k0, std::uint32_t k1) {
        const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
        const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 2> base_;
};

// Sequential view over one Philox stream with the usual scalar draws.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream) : philox_(seed, stream) {}

    std::uint32_t next_u32() {
        if (pos_ == 4) {
            buffer_ = philox_(block_++);
            pos_ = 0;
        }
        return buffer_[pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // Uniform on [0, 1), 53 usable bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer on {lo, ..., hi} via rejection-free 64-bit scaling.
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
        const std::uint64_t span = hi - lo + 1;
        // modulo bias is < 2^-64 * span; negligible for the span sizes used here
        return lo + next_u64() % span;
    }

    // Standard normal via Box-Muller; second value of the pair is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    Philox philox_;
    Philox::Block buffer_{};
    std::uint64_t block_ = 0;
    int pos_ = 4;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Stable stream ids: FNV-1a over a purpose tag plus up to two indices.
// A fixed naming scheme keeps parallel and serial execution bit-identical.
constexpr std::uint64_t stream_id(std::string_view tag, std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    auto mix = [&h](std::uint64_t byte) {
        h ^= byte;
        h *= 0x100000001B3ull;
    };
    for (const char c : tag) mix(static_cast<unsigned char>(c));
    for (int i = 0; i < 8; ++i) mix((a >> (8 * i)) & 0xFF);
    for (int i = 0; i < 8; ++i) mix((b >> (8 * i)) & 0xFF);
    return h;
}

}  // namespace sfreq
