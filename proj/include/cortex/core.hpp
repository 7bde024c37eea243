// core.hpp: fixed-point codes, minicolumn addressing and the dithered decay
// primitive used by every neuron update.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>

namespace cortex
{

/// Signed 4-bit two's-complement value; real value is code/8, so the
/// representable range is [-1.0, +0.875].
struct Code4
{
    static constexpr int kMin = -8;
    static constexpr int kMax = 7;

    std::int8_t code{0};

    constexpr Code4() = default;
    /// Saturating constructor.
    constexpr explicit Code4(int c) : code(static_cast<std::int8_t>(std::clamp(c, kMin, kMax))) {}

    [[nodiscard]] constexpr double value() const { return code / 8.0; }
    constexpr bool operator==(const Code4 &) const = default;
};

/// Unsigned 8-bit gain, value = code/16 in [0.0625, 15.9375].
struct Gain8
{
    std::uint8_t code{16};

    constexpr Gain8() = default;
    constexpr explicit Gain8(int c) : code(static_cast<std::uint8_t>(c))
    {
        if (c < 1 || c > 255)
        {
            throw std::out_of_range("gain code must be in [1, 255]");
        }
    }

    /// Nearest code for a real gain.
    static Gain8 from_real(double g);
    [[nodiscard]] constexpr double value() const { return code / 16.0; }
    constexpr bool operator==(const Gain8 &) const = default;
};

/// Leak rate L; the per-step decay factor is L/256.
struct Leak8
{
    std::uint8_t code{0};
    constexpr bool operator==(const Leak8 &) const = default;
};

/// Unsigned 4-bit spike count, saturating at 15.
struct Count4
{
    static constexpr int kMax = 15;

    std::uint8_t count{0};

    constexpr Count4() = default;
    constexpr explicit Count4(int c) : count(static_cast<std::uint8_t>(std::clamp(c, 0, kMax))) {}
    constexpr bool operator==(const Count4 &) const = default;
};

inline constexpr int kNeuronTypes = 8;
inline constexpr int kNeuronsPerMinicolumn = 100;
inline constexpr int kMinicolumnsPerHyper = 128;

using TypeCounts = std::array<Count4, kNeuronTypes>;
using TypeWeights = std::array<Code4, kNeuronTypes>;

/// 27-bit minicolumn address: 20-bit hypercolumn, 7-bit minicolumn index.
struct MiniAddr
{
    static constexpr std::uint32_t kHyperBits = 20;
    static constexpr std::uint32_t kMiniBits = 7;
    static constexpr std::uint32_t kBits = kHyperBits + kMiniBits;
    static constexpr std::uint32_t kHyperMask = (1u << kHyperBits) - 1;
    static constexpr std::uint32_t kMiniMask = (1u << kMiniBits) - 1;
    static constexpr std::uint32_t kAddrMask = (1u << kBits) - 1;

    std::uint32_t raw{0};

    constexpr MiniAddr() = default;
    constexpr explicit MiniAddr(std::uint32_t packed) : raw(packed & kAddrMask) {}
    constexpr MiniAddr(std::uint32_t hyper, std::uint32_t mini)
        : raw(((hyper & kHyperMask) << kMiniBits) | (mini & kMiniMask))
    {
    }

    [[nodiscard]] constexpr std::uint32_t hyper() const { return raw >> kMiniBits; }
    [[nodiscard]] constexpr std::uint32_t mini() const { return raw & kMiniMask; }

    constexpr auto operator<=>(const MiniAddr &) const = default;
};

/// Inter-column message: source minicolumn plus per-type spike counts.
struct Event
{
    MiniAddr source;
    TypeCounts counts{};
};

/// L = round(256 * tau / (tau + 1)), clamped to 255. Throws
/// std::out_of_range unless 0 < tau_ms <= 30.
Leak8 leak_code(double tau_ms);

/// floor((x*L + 8*r) / 256) on an unclamped integer. The 5-bit draw r fills
/// the discarded low byte, so over all 32 values of r the mean is
/// floor(x*L/8)/32, within 1/32 of x*L/256.
[[nodiscard]] constexpr int dithered_decay(int x, Leak8 leak, std::uint32_t r5)
{
    const int num = x * leak.code + 8 * static_cast<int>(r5 & 31u);
    // arithmetic shift floors toward -inf
    return num >> 8;
}

[[nodiscard]] constexpr Code4 decay_stochastic(Code4 x, Leak8 leak, std::uint32_t r5)
{
    return Code4(dithered_decay(x.code, leak, r5));
}

/// (hyper + offset) mod 2^20.
[[nodiscard]] constexpr std::uint32_t addr_wrap_add(std::uint32_t hyper, std::uint32_t offset)
{
    return (hyper + offset) & MiniAddr::kHyperMask;
}

/// SplitMix64 finalizer; also used to derive independent stream seeds.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

[[nodiscard]] constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b)
{
    return mix64(a ^ mix64(b + 0x632be59bd9b4e019ull));
}

/// Deterministic uniform generator (SplitMix64). Draws of width w take the
/// top w bits of one 64-bit output; draw5() packs twelve 5-bit values per
/// output word.
class RngStream
{
public:
    constexpr explicit RngStream(std::uint64_t seed = 0) : state_(seed) {}

    /// Derived stream for (seed, a, b); used for per-slot per-step streams.
    static constexpr RngStream derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0)
    {
        return RngStream(mix_seed(mix_seed(seed, a), b));
    }

    constexpr std::uint64_t next()
    {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    constexpr std::uint32_t draw5()
    {
        if (pool_left_ == 0)
        {
            pool_ = next();
            pool_left_ = 12;
        }
        const auto v = static_cast<std::uint32_t>(pool_ & 31u);
        pool_ >>= 5;
        --pool_left_;
        return v;
    }
    constexpr std::uint32_t draw10() { return static_cast<std::uint32_t>(next() >> 54); }
    constexpr std::uint32_t draw20() { return static_cast<std::uint32_t>(next() >> 44); }

    /// Uniform in [0, 1) with 53 bits.
    constexpr double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n) (Lemire's multiply-shift, bias < 2^-32 for n < 2^32).
    constexpr std::uint32_t below(std::uint32_t n)
    {
        return static_cast<std::uint32_t>(((next() >> 32) * n) >> 32);
    }

private:
    std::uint64_t state_;
    std::uint64_t pool_{0};
    int pool_left_{0};
};

} // namespace cortex
