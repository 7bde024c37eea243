// neuron.hpp: the physical-minicolumn kernel. 100 stochastic fixed-point LIF
// neurons in up to 8 types, one 1 ms update per call.
#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "cortex/core.hpp"

namespace cortex
{

/// One neuron's stored state, packed into a byte: PSC in the high nibble,
/// membrane in the low nibble.
struct NeuronState
{
    Code4 psc;
    Code4 vmem;

    [[nodiscard]] constexpr std::uint8_t pack() const
    {
        return static_cast<std::uint8_t>(((psc.code & 0xF) << 4) | (vmem.code & 0xF));
    }
    [[nodiscard]] static constexpr NeuronState unpack(std::uint8_t b)
    {
        // sign-extend each nibble
        const int hi = (b >> 4) & 0xF;
        const int lo = b & 0xF;
        return NeuronState{Code4(hi >= 8 ? hi - 16 : hi), Code4(lo >= 8 ? lo - 16 : lo)};
    }
    constexpr bool operator==(const NeuronState &) const = default;
};

/// Serialized minicolumn state: exactly one byte per neuron.
using MinicolumnState = std::array<std::uint8_t, kNeuronsPerMinicolumn>;

struct NeuronTypeParams
{
    Leak8 leak_epsc{};
    Leak8 leak_ipsc{};
    Leak8 leak_mem{};
    Leak8 leak_rfc{};
    Gain8 g_syn{};
    Gain8 g_psc{};
    Code4 v_init{0};
    Code4 v_reset{-4};

    constexpr bool operator==(const NeuronTypeParams &) const = default;
};

/// Assignment of the 25 four-neuron groups to neuron types.
struct MinicolumnLayout
{
    static constexpr int kGroups = kNeuronsPerMinicolumn / 4;

    std::array<std::uint8_t, kGroups> group_type{};

    [[nodiscard]] constexpr int type_of(int neuron) const { return group_type[neuron / 4]; }
    [[nodiscard]] int population(int type) const;

    /// Groups assigned in type order from per-type neuron counts. Throws
    /// std::invalid_argument unless every count is a multiple of 4 and they
    /// sum to 100.
    static MinicolumnLayout from_counts(const std::array<int, kNeuronTypes> &counts);

    constexpr bool operator==(const MinicolumnLayout &) const = default;
};

struct MinicolumnParams
{
    MinicolumnLayout layout;
    std::array<NeuronTypeParams, kNeuronTypes> types{};

    constexpr bool operator==(const MinicolumnParams &) const = default;
};

/// Post-synaptic current update. The leak is chosen by the sign of the
/// current PSC (EPSC leak for psc >= 0).
[[nodiscard]] constexpr Code4 psc_step(Code4 psc, Code4 w, const NeuronTypeParams &p, std::uint32_t r5)
{
    const Leak8 leak = psc.code >= 0 ? p.leak_epsc : p.leak_ipsc;
    const int drive = (p.g_syn.code * w.code) >> 4;
    return Code4(dithered_decay(psc.code, leak, r5) + drive);
}

struct SomaResult
{
    Code4 vmem;
    bool spiked{false};
};

/// Membrane update. Decay acts on the deviation from v_init; the PSC is
/// integrated only in the active state (vmem >= v_init). Overflow with a
/// positive PSC spikes; any overflow or underflow resets to v_reset.
[[nodiscard]] constexpr SomaResult soma_step(NeuronState s, Code4 psc_new, const NeuronTypeParams &p,
        std::uint32_t r5)
{
    const int v_init = p.v_init.code;
    const int deviation = s.vmem.code - v_init;
    int v_raw = 0;
    if (s.vmem.code >= v_init)
    {
        v_raw = v_init + dithered_decay(deviation, p.leak_mem, r5) + ((p.g_psc.code * psc_new.code) >> 4);
    }
    else
    {
        v_raw = v_init + dithered_decay(deviation, p.leak_rfc, r5);
    }

    SomaResult out;
    out.spiked = v_raw > Code4::kMax && psc_new.code > 0;
    if (v_raw > Code4::kMax || v_raw < Code4::kMin)
    {
        out.vmem = p.v_reset;
    }
    else
    {
        out.vmem = Code4(v_raw);
    }
    return out;
}

/// 100-bit spike map, bit n = neuron n.
struct SpikeBitmap
{
    std::array<std::uint64_t, 2> words{};

    void set(int neuron) { words[neuron >> 6] |= (1ull << (neuron & 63)); }
    [[nodiscard]] bool test(int neuron) const { return (words[neuron >> 6] >> (neuron & 63)) & 1u; }
    [[nodiscard]] bool any() const { return (words[0] | words[1]) != 0; }
    [[nodiscard]] int popcount() const;
    constexpr bool operator==(const SpikeBitmap &) const = default;
};

struct MinicolumnOutput
{
    TypeCounts counts{};
    SpikeBitmap spikes;

    [[nodiscard]] bool any_counts() const;
};

/// One step of a whole minicolumn. Neuron n of type k sees input w[k]; each
/// neuron consumes two 5-bit draws (PSC then soma) in neuron order. `in` and
/// `out` may alias.
MinicolumnOutput minicolumn_step(std::span<const std::uint8_t, kNeuronsPerMinicolumn> in,
        std::span<std::uint8_t, kNeuronsPerMinicolumn> out, const MinicolumnParams &params,
        const TypeWeights &w, RngStream &rng);

/// psc = 0 and vmem = v_init for every neuron.
[[nodiscard]] bool at_rest(std::span<const std::uint8_t, kNeuronsPerMinicolumn> state,
        const MinicolumnParams &params);

/// The rest state for a minicolumn with these parameters.
[[nodiscard]] MinicolumnState rest_state(const MinicolumnParams &params);

} // namespace cortex
