// Small lookup tables for tests.
#pragma once

#include <memory>
#include <vector>

#include "cortex/param_lut.hpp"

namespace fixture
{

using namespace cortex;

inline NeuronTypeParams table_type()
{
    NeuronTypeParams p;
    p.leak_epsc = leak_code(5.8);
    p.leak_ipsc = leak_code(5.8);
    p.leak_mem = leak_code(5.8);
    p.leak_rfc = leak_code(3.0);
    return p;
}

inline MinicolumnParams table_minicolumn()
{
    MinicolumnParams mp;
    mp.layout = MinicolumnLayout::from_counts({32, 8, 16, 4, 32, 8, 0, 0});
    mp.types.fill(table_type());
    return mp;
}

/// Uniform connection rule: all source types onto all destination types.
inline ConnectionRule dense_rule(std::uint32_t offset, int fanout, int dest, int weight)
{
    ConnectionRule r;
    r.offset = offset;
    r.fanout_size = fanout;
    r.dest_hc_size = dest;
    r.weights.fill(Code4(weight));
    r.masks.fill(0xFF);
    return r;
}

inline void enable(ConnectionSet &cs, int slot, int delay, const ConnectionRule &rule)
{
    cs.post.slots[slot] = PostSlot{true, static_cast<std::uint8_t>(delay)};
    cs.rules[slot] = rule;
}

/// One parameter record and one connection set covering every address.
inline std::shared_ptr<const ParamLut> single_range(const ConnectionSet &cs, std::uint64_t seed = 1)
{
    return std::make_shared<const ParamLut>(RangeCam({0}), std::vector<RangeEntry>{{0, 0}},
            std::vector<MinicolumnParams>{table_minicolumn()}, std::vector<ConnectionSet>{cs}, seed);
}

/// Range i starts at hypercolumn i and uses connection set i.
inline std::shared_ptr<const ParamLut> per_hyper(const std::vector<ConnectionSet> &sets, std::uint64_t seed = 1)
{
    std::vector<std::uint32_t> th;
    std::vector<RangeEntry> ranges;
    for (std::size_t i = 0; i < sets.size(); ++i)
    {
        th.push_back(MiniAddr(static_cast<std::uint32_t>(i), 0).raw);
        ranges.push_back({0, i});
    }
    return std::make_shared<const ParamLut>(RangeCam(th), ranges, std::vector<MinicolumnParams>{table_minicolumn()},
            sets, seed);
}

} // namespace fixture
