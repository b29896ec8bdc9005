#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace kqsd {

// Counter-based block cipher (Philox 4x64, 10 rounds).  Each output block is a
// pure function of (key, counter), so draws can be addressed by logical position
// instead of generator state and are reproducible under any thread schedule.
struct Philox4x64 {
    static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
    static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
    static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

    static std::array<std::uint64_t, 4> block(std::uint64_t key0, std::uint64_t key1,
                                              std::array<std::uint64_t, 4> ctr) {
        for (int round = 0; round < 10; ++round) {
            const unsigned __int128 prod0 = static_cast<unsigned __int128>(kMul0) * ctr[0];
            const unsigned __int128 prod1 = static_cast<unsigned __int128>(kMul1) * ctr[2];
            const std::uint64_t hi0 = static_cast<std::uint64_t>(prod0 >> 64);
            const std::uint64_t lo0 = static_cast<std::uint64_t>(prod0);
            const std::uint64_t hi1 = static_cast<std::uint64_t>(prod1 >> 64);
            const std::uint64_t lo1 = static_cast<std::uint64_t>(prod1);
            ctr = {hi1 ^ ctr[1] ^ key0, lo1, hi0 ^ ctr[3] ^ key1, lo0};
            key0 += kWeyl0;
            key1 += kWeyl1;
        }
        return ctr;
    }
};

inline double uniform_from_bits(std::uint64_t x) {
    // 52-bit grid shifted off both endpoints; the all-ones word maps to
    // 1 - 2^-53 exactly, so the interval stays open and log() finite.
    return static_cast<double>(x >> 12) * 0x1.0p-52 + 0x1.0p-53;
}

// Draw source addressed by (step index, slot within step).
class NoiseSource {
  public:
    virtual ~NoiseSource() = default;
    virtual double normal(std::uint64_t step, unsigned slot) = 0;
};

// Deterministic noise source keyed by (seed, stream).  normal(step, slot) is a
// pure function of its arguments; the cached block only saves recomputation.
// slots_per_step fixes the draw budget per step so addressing stays stable.
class CounterRng final : public NoiseSource {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream, unsigned slots_per_step = 1)
        : seed_(seed), stream_(stream), slots_per_step_(slots_per_step) {}

    double normal(std::uint64_t step, unsigned slot) override {
        const std::uint64_t k = step * slots_per_step_ + slot;
        fill_normal_block(k >> 2);
        return z_[k & 3];
    }

    // Uniform in (0,1), addressed on a lane disjoint from the normal draws.
    double uniform(std::uint64_t step, unsigned slot) {
        const std::uint64_t k = step * slots_per_step_ + slot;
        const auto words =
            Philox4x64::block(seed_, stream_, {k >> 2, kUniformLane, 0, 0});
        return uniform_from_bits(words[k & 3]);
    }

    std::uint64_t stream() const { return stream_; }

  private:
    static constexpr std::uint64_t kNormalLane = 0;
    static constexpr std::uint64_t kUniformLane = 1;

    void fill_normal_block(std::uint64_t block) {
        if (block == cached_block_) return;
        const auto words =
            Philox4x64::block(seed_, stream_, {block, kNormalLane, 0, 0});
        const double u0 = uniform_from_bits(words[0]);
        const double u1 = uniform_from_bits(words[1]);
        const double u2 = uniform_from_bits(words[2]);
        const double u3 = uniform_from_bits(words[3]);
        const double r0 = std::sqrt(-2.0 * std::log(u0));
        const double r1 = std::sqrt(-2.0 * std::log(u2));
        constexpr double two_pi = 6.283185307179586476925286766559;
        z_[0] = r0 * std::cos(two_pi * u1);
        z_[1] = r0 * std::sin(two_pi * u1);
        z_[2] = r1 * std::cos(two_pi * u3);
        z_[3] = r1 * std::sin(two_pi * u3);
        cached_block_ = block;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    unsigned slots_per_step_;
    std::uint64_t cached_block_ = ~0ULL;
    double z_[4] = {0, 0, 0, 0};
};

// Forces every gaussian increment to zero; for deterministic-limit tests.
class ZeroNoise final : public NoiseSource {
  public:
    double normal(std::uint64_t, unsigned) override { return 0.0; }
};

// Reserved stream ids for auxiliary draws; sample streams use [0, 2^32).
namespace streams {
inline constexpr std::uint64_t resample = (1ULL << 62) + 1;
inline constexpr std::uint64_t initial = (1ULL << 62) + 2;
inline constexpr std::uint64_t bootstrap = (1ULL << 62) + 3;
inline constexpr std::uint64_t synthetic = (1ULL << 62) + 4;
}  // namespace streams

}  // namespace kqsd
