#include "cortex/neuron.hpp"

#include <bit>
#include <stdexcept>
#include <string>

namespace cortex
{

int MinicolumnLayout::population(int type) const
{
    int n = 0;
    for (auto t : group_type)
    {
        n += (t == type) ? 4 : 0;
    }
    return n;
}

MinicolumnLayout MinicolumnLayout::from_counts(const std::array<int, kNeuronTypes> &counts)
{
    MinicolumnLayout layout;
    int group = 0;
    for (int type = 0; type < kNeuronTypes; ++type)
    {
        const int n = counts[type];
        if (n < 0 || n % 4 != 0)
        {
            throw std::invalid_argument("neuron count for type " + std::to_string(type) +
                    " must be a non-negative multiple of 4");
        }
        for (int g = 0; g < n / 4; ++g)
        {
            if (group >= kGroups)
            {
                throw std::invalid_argument("neuron counts exceed 100");
            }
            layout.group_type[group++] = static_cast<std::uint8_t>(type);
        }
    }
    if (group != kGroups)
    {
        throw std::invalid_argument("neuron counts sum to " + std::to_string(group * 4) +
                ", expected 100");
    }
    return layout;
}

int SpikeBitmap::popcount() const
{
    return std::popcount(words[0]) + std::popcount(words[1]);
}

bool MinicolumnOutput::any_counts() const
{
    for (auto c : counts)
    {
        if (c.count != 0)
        {
            return true;
        }
    }
    return false;
}

MinicolumnOutput minicolumn_step(std::span<const std::uint8_t, kNeuronsPerMinicolumn> in,
        std::span<std::uint8_t, kNeuronsPerMinicolumn> out, const MinicolumnParams &params,
        const TypeWeights &w, RngStream &rng)
{
    std::array<int, kNeuronTypes> spikes_by_type{};
    MinicolumnOutput result;

    for (int n = 0; n < kNeuronsPerMinicolumn; ++n)
    {
        const int type = params.layout.type_of(n);
        const NeuronTypeParams &p = params.types[type];
        const NeuronState s = NeuronState::unpack(in[n]);

        const Code4 psc = psc_step(s.psc, w[type], p, rng.draw5());
        const SomaResult soma = soma_step(s, psc, p, rng.draw5());

        out[n] = NeuronState{psc, soma.vmem}.pack();
        if (soma.spiked)
        {
            ++spikes_by_type[type];
            result.spikes.set(n);
        }
    }
    for (int k = 0; k < kNeuronTypes; ++k)
    {
        result.counts[k] = Count4(spikes_by_type[k]);
    }
    return result;
}

bool at_rest(std::span<const std::uint8_t, kNeuronsPerMinicolumn> state, const MinicolumnParams &params)
{
    for (int n = 0; n < kNeuronsPerMinicolumn; ++n)
    {
        const auto s = NeuronState::unpack(state[n]);
        if (s.psc.code != 0 || s.vmem != params.types[params.layout.type_of(n)].v_init)
        {
            return false;
        }
    }
    return true;
}

MinicolumnState rest_state(const MinicolumnParams &params)
{
    MinicolumnState s{};
    for (int n = 0; n < kNeuronsPerMinicolumn; ++n)
    {
        s[n] = NeuronState{Code4(0), params.types[params.layout.type_of(n)].v_init}.pack();
    }
    return s;
}

} // namespace cortex
