#include "cortex/synapse.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace cortex
{

DestinationList map_destinations(const DelayedEvent &ev, const ConnectionRule &rule, std::uint64_t network_seed)
{
    const std::uint32_t dest_hyper = addr_wrap_add(ev.source.hyper(), rule.offset);
    RngStream rng = RngStream::derive(network_seed, dest_hyper, (std::uint64_t{ev.source.mini()} << 4) | ev.slot);

    std::array<std::uint8_t, kMinicolumnsPerHyper> perm{};
    const auto n = static_cast<std::uint32_t>(rule.dest_hc_size);
    std::iota(perm.begin(), perm.begin() + n, std::uint8_t{0});

    DestinationList out;
    for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(rule.fanout_size); ++i)
    {
        const std::uint32_t j = i + rng.below(n - i);
        std::swap(perm[i], perm[j]);
        out.items[out.count++] = MiniAddr(dest_hyper, perm[i]);
    }
    return out;
}

TypeWeights modulate(const TypeCounts &counts, const ConnectionRule &rule)
{
    std::array<int, kNeuronTypes> weighted{};
    for (int s = 0; s < kNeuronTypes; ++s)
    {
        weighted[s] = counts[s].count * rule.weights[s].code;
    }
    TypeWeights w{};
    for (int d = 0; d < kNeuronTypes; ++d)
    {
        int raw = 0;
        for (int s = 0; s < kNeuronTypes; ++s)
        {
            if ((rule.masks[d] >> s) & 1u)
            {
                raw += weighted[s];
            }
        }
        w[d] = Code4(raw);
    }
    return w;
}

ArbiterFull::ArbiterFull(int arbiter, std::size_t bound_groups, std::size_t capacity)
    : std::runtime_error("arbiter " + std::to_string(arbiter) + " full: " + std::to_string(bound_groups) +
              "/" + std::to_string(capacity) + " groups bound (activity bound exceeded)"),
      arbiter_(arbiter)
{
}

ArbiterBank::ArbiterBank(std::size_t groups_per_arbiter, bool bypass)
    : groups_per_arbiter_(groups_per_arbiter), bypass_(bypass),
      groups_(groups_per_arbiter * kArbiters), acc_(groups_per_arbiter * kArbiters * kLanes)
{
    if (groups_per_arbiter == 0 || groups_per_arbiter > kDefaultGroups)
    {
        throw std::invalid_argument("groups per arbiter must be 1..8192");
    }
}

std::uint32_t ArbiterBank::find_or_bind(int arbiter, std::uint32_t key)
{
    Arbiter &arb = arbiters_[arbiter];
    if (bypass_ && arb.last_valid && arb.last_key == key)
    {
        ++bypass_hits_;
        return arb.last_group;
    }

    ++cam_lookups_;
    std::uint32_t local = 0;
    if (auto it = arb.cam.find(key); it != arb.cam.end())
    {
        local = it->second;
    }
    else
    {
        if (arb.cam.size() >= groups_per_arbiter_)
        {
            throw ArbiterFull(arbiter, arb.cam.size(), groups_per_arbiter_);
        }
        const std::size_t base = static_cast<std::size_t>(arbiter) * groups_per_arbiter_;
        std::size_t probe = arb.cursor;
        while (groups_[base + probe].allocated)
        {
            probe = (probe + 1) % groups_per_arbiter_;
        }
        local = static_cast<std::uint32_t>(probe);
        groups_[base + probe] = Group{key, 0, true};
        arb.cam.emplace(key, local);
        arb.cursor = (probe + 1) % groups_per_arbiter_;
    }
    arb.last_valid = true;
    arb.last_key = key;
    arb.last_group = local;
    return local;
}

AccumulateResult ArbiterBank::accumulate(const PreSynapticContribution &c)
{
    const int arbiter = arbiter_of(c.dest);
    const std::uint32_t local = find_or_bind(arbiter, group_key(c.dest));
    const std::uint32_t lane = lane_of(c.dest);
    const std::size_t group_index = static_cast<std::size_t>(arbiter) * groups_per_arbiter_ + local;

    AccumulateResult r;
    r.slot = static_cast<std::uint32_t>(group_index * kLanes + lane);
    Group &g = groups_[group_index];
    if (((g.lanes >> lane) & 1u) == 0)
    {
        g.lanes = static_cast<std::uint8_t>(g.lanes | (1u << lane));
        ++arbiters_[arbiter].bound_slots;
        r.newly_bound = true;
    }
    auto &a = acc_[r.slot];
    for (int k = 0; k < kNeuronTypes; ++k)
    {
        a[k] += c.w[k].code;
    }
    return r;
}

void ArbiterBank::check_bound(std::uint32_t slot, const char *what) const
{
    if (!bound(slot))
    {
        throw std::logic_error(std::string(what) + " on unbound slot " + std::to_string(slot));
    }
}

bool ArbiterBank::bound(std::uint32_t slot) const
{
    if (slot >= slot_count())
    {
        return false;
    }
    return (groups_[slot / kLanes].lanes >> (slot % kLanes)) & 1u;
}

MiniAddr ArbiterBank::address(std::uint32_t slot) const
{
    check_bound(slot, "address");
    const std::size_t group_index = slot / kLanes;
    const auto arbiter = static_cast<std::uint32_t>(group_index / groups_per_arbiter_);
    return MiniAddr((arbiter << 23) | (groups_[group_index].key << 3) | (slot % kLanes));
}

bool ArbiterBank::pending_zero(std::uint32_t slot) const
{
    const auto &a = acc_[slot];
    return std::all_of(a.begin(), a.end(), [](std::int32_t v) { return v == 0; });
}

FlushResult ArbiterBank::flush(std::uint32_t slot)
{
    check_bound(slot, "flush");
    FlushResult r;
    r.addr = address(slot);
    auto &a = acc_[slot];
    for (int k = 0; k < kNeuronTypes; ++k)
    {
        r.w[k] = Code4(a[k]);
        a[k] = 0;
    }
    return r;
}

void ArbiterBank::release(std::uint32_t slot)
{
    check_bound(slot, "release");
    const std::size_t group_index = slot / kLanes;
    const int arbiter = static_cast<int>(group_index / groups_per_arbiter_);
    Group &g = groups_[group_index];
    g.lanes = static_cast<std::uint8_t>(g.lanes & ~(1u << (slot % kLanes)));
    acc_[slot].fill(0);
    Arbiter &arb = arbiters_[arbiter];
    --arb.bound_slots;
    if (g.lanes == 0)
    {
        arb.cam.erase(g.key);
        if (arb.last_valid && arb.last_key == g.key)
        {
            arb.last_valid = false;
        }
        g.allocated = false;
    }
}

std::size_t ArbiterBank::bound_slots() const
{
    std::size_t n = 0;
    for (const auto &a : arbiters_)
    {
        n += a.bound_slots;
    }
    return n;
}

} // namespace cortex
