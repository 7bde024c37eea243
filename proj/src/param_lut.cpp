#include "cortex/param_lut.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace cortex
{

int PostConnection::enabled_count() const
{
    return static_cast<int>(std::count_if(slots.begin(), slots.end(),
            [](const PostSlot &s) { return s.enabled; }));
}

RangeCam::RangeCam(std::vector<std::uint32_t> thresholds) : thresholds_(std::move(thresholds))
{
    if (thresholds_.empty() || thresholds_.front() != 0)
    {
        throw std::invalid_argument("range CAM must start at address 0");
    }
    if (thresholds_.size() > kCapacity)
    {
        throw std::invalid_argument("range CAM holds at most " + std::to_string(kCapacity) +
                " thresholds, got " + std::to_string(thresholds_.size()));
    }
    for (std::size_t i = 1; i < thresholds_.size(); ++i)
    {
        if (thresholds_[i] <= thresholds_[i - 1])
        {
            throw std::invalid_argument("range thresholds must be strictly increasing (index " +
                    std::to_string(i) + ")");
        }
    }
    if (thresholds_.back() > MiniAddr::kAddrMask)
    {
        throw std::invalid_argument("range threshold exceeds 27 bits");
    }
}

std::size_t RangeCam::lookup(MiniAddr addr) const
{
    const auto it = std::upper_bound(thresholds_.begin(), thresholds_.end(), addr.raw);
    return static_cast<std::size_t>(it - thresholds_.begin()) - 1;
}

namespace
{

void check_params(const MinicolumnParams &p, std::size_t index)
{
    for (int t = 0; t < kNeuronTypes; ++t)
    {
        if (p.types[t].v_reset.code > p.types[t].v_init.code)
        {
            throw std::invalid_argument("parameter record " + std::to_string(index) + " type " +
                    std::to_string(t) + ": v_reset above v_init");
        }
    }
    for (auto g : p.layout.group_type)
    {
        if (g >= kNeuronTypes)
        {
            throw std::invalid_argument("parameter record " + std::to_string(index) +
                    ": layout references type >= 8");
        }
    }
}

void check_connections(const ConnectionSet &c, std::size_t index)
{
    for (int s = 0; s < kConnectionSlots; ++s)
    {
        const PostSlot &ps = c.post.slots[s];
        if (!ps.enabled)
        {
            continue;
        }
        const std::string where = "connection record " + std::to_string(index) + " slot " +
                std::to_string(s);
        if (ps.delay_class < 1 || ps.delay_class > kDelayClasses)
        {
            throw std::invalid_argument(where + ": delay must be 1..16 ms");
        }
        const ConnectionRule &r = c.rules[s];
        if (r.offset > MiniAddr::kHyperMask)
        {
            throw std::invalid_argument(where + ": offset exceeds 20 bits");
        }
        if (r.dest_hc_size < 1 || r.dest_hc_size > kMinicolumnsPerHyper)
        {
            throw std::invalid_argument(where + ": destination hypercolumn size must be 1..128");
        }
        if (r.fanout_size < 1 || r.fanout_size > r.dest_hc_size)
        {
            throw std::invalid_argument(where + ": fanout must be 1..dest_hc_size");
        }
    }
}

} // namespace

ParamLut::ParamLut(RangeCam cam, std::vector<RangeEntry> ranges, std::vector<MinicolumnParams> params,
        std::vector<ConnectionSet> connections, std::uint64_t network_seed)
    : cam_(std::move(cam)), ranges_(std::move(ranges)), params_(std::move(params)),
      connections_(std::move(connections)), network_seed_(network_seed)
{
    if (ranges_.size() != cam_.size())
    {
        throw std::invalid_argument("range table size does not match CAM size");
    }
    for (std::size_t i = 0; i < ranges_.size(); ++i)
    {
        if (ranges_[i].param_index >= params_.size())
        {
            throw std::invalid_argument("range " + std::to_string(i) + ": undefined parameter type");
        }
        if (ranges_[i].conn_index >= connections_.size())
        {
            throw std::invalid_argument("range " + std::to_string(i) + ": undefined connection id");
        }
    }
    for (std::size_t i = 0; i < params_.size(); ++i)
    {
        check_params(params_[i], i);
    }
    for (std::size_t i = 0; i < connections_.size(); ++i)
    {
        check_connections(connections_[i], i);
    }
}

const MinicolumnParams &ParamLut::minicolumn_params(MiniAddr addr) const
{
    return params_[ranges_[cam_.lookup(addr)].param_index];
}

const PostConnection &ParamLut::post_connections(MiniAddr addr) const
{
    return connections_[ranges_[cam_.lookup(addr)].conn_index].post;
}

const ConnectionRule &ParamLut::pre_connection(MiniAddr addr, int slot) const
{
    const ConnectionSet &c = connections_[ranges_[cam_.lookup(addr)].conn_index];
    if (slot < 0 || slot >= kConnectionSlots || !c.post.slots[slot].enabled)
    {
        throw std::logic_error("pre_connection: slot " + std::to_string(slot) + " not enabled");
    }
    return c.rules[slot];
}

} // namespace cortex
