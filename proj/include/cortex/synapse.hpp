// synapse.hpp: delayed events to per-destination synaptic input. Destination
// mapping, mask-based weight modulation, and the 16-arbiter dynamic
// assignment of DA minicolumns to TM slots.
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "cortex/axon.hpp"
#include "cortex/core.hpp"
#include "cortex/param_lut.hpp"

namespace cortex
{

/// Up to 128 destination minicolumns of one hypercolumn.
struct DestinationList
{
    std::array<MiniAddr, kMinicolumnsPerHyper> items{};
    int count{0};

    [[nodiscard]] const MiniAddr *begin() const { return items.data(); }
    [[nodiscard]] const MiniAddr *end() const { return items.data() + count; }
    [[nodiscard]] int size() const { return count; }
};

/// Destination hypercolumn = source hyper + offset (mod 2^20). Minicolumn
/// indices are the first fanout_size entries of a Fisher-Yates shuffle of
/// [0, dest_hc_size) seeded by (network seed, dest hyper, source mini, slot),
/// so a given source always reaches the same destinations.
DestinationList map_destinations(const DelayedEvent &ev, const ConnectionRule &rule, std::uint64_t network_seed);

/// w[d] = clamp(sum over s with masks[d] bit s of counts[s] * weights[s]).
TypeWeights modulate(const TypeCounts &counts, const ConnectionRule &rule);

struct PreSynapticContribution
{
    MiniAddr dest;
    TypeWeights w{};
};

class ArbiterFull : public std::runtime_error
{
public:
    ArbiterFull(int arbiter, std::size_t bound_groups, std::size_t capacity);
    [[nodiscard]] int arbiter() const { return arbiter_; }

private:
    int arbiter_;
};

struct AccumulateResult
{
    std::uint32_t slot{0};
    bool newly_bound{false};
};

struct FlushResult
{
    MiniAddr addr;
    TypeWeights w{};
};

/// 16 arbiters, each with `groups_per_arbiter` CAM entries of 8 slots.
/// Slot ids are flat: arbiter * (groups * 8) + group * 8 + lane, which is
/// also the TM minicolumn index.
class ArbiterBank
{
public:
    static constexpr int kArbiters = 16;
    static constexpr int kLanes = 8;
    static constexpr std::size_t kDefaultGroups = 8192;

    explicit ArbiterBank(std::size_t groups_per_arbiter = kDefaultGroups, bool bypass = true);

    /// Throws ArbiterFull if a new group key finds no free group.
    AccumulateResult accumulate(const PreSynapticContribution &c);
    /// Returns the bound address and the clamped input, then clears the
    /// accumulators. The binding persists.
    FlushResult flush(std::uint32_t slot);
    /// Frees the slot; the group is freed once all 8 lanes are free.
    void release(std::uint32_t slot);

    [[nodiscard]] bool bound(std::uint32_t slot) const;
    [[nodiscard]] MiniAddr address(std::uint32_t slot) const;
    /// Pending accumulated input is all zero.
    [[nodiscard]] bool pending_zero(std::uint32_t slot) const;
    [[nodiscard]] std::uint8_t lane_mask(std::uint32_t group_index) const { return groups_[group_index].lanes; }

    [[nodiscard]] std::size_t groups_per_arbiter() const { return groups_per_arbiter_; }
    [[nodiscard]] std::size_t slot_count() const { return groups_.size() * kLanes; }
    [[nodiscard]] std::size_t bound_groups(int arbiter) const { return arbiters_[arbiter].cam.size(); }
    [[nodiscard]] std::size_t bound_slots(int arbiter) const { return arbiters_[arbiter].bound_slots; }
    [[nodiscard]] std::size_t bound_slots() const;
    [[nodiscard]] std::uint64_t cam_lookups() const { return cam_lookups_; }
    [[nodiscard]] std::uint64_t bypass_hits() const { return bypass_hits_; }

    [[nodiscard]] static constexpr int arbiter_of(MiniAddr a) { return static_cast<int>(a.raw >> 23); }
    [[nodiscard]] static constexpr std::uint32_t group_key(MiniAddr a) { return (a.raw >> 3) & 0xFFFFFu; }
    [[nodiscard]] static constexpr std::uint32_t lane_of(MiniAddr a) { return a.raw & 7u; }

private:
    struct Group
    {
        std::uint32_t key{0};
        std::uint8_t lanes{0}; // bound-lane bitmap
        bool allocated{false};
    };

    struct Arbiter
    {
        std::unordered_map<std::uint32_t, std::uint32_t> cam; // key -> local group
        std::size_t cursor{0};
        std::size_t bound_slots{0};
        bool last_valid{false};
        std::uint32_t last_key{0};
        std::uint32_t last_group{0};
    };

    std::uint32_t find_or_bind(int arbiter, std::uint32_t key);
    void check_bound(std::uint32_t slot, const char *what) const;

    std::size_t groups_per_arbiter_;
    bool bypass_;
    std::array<Arbiter, kArbiters> arbiters_;
    std::vector<Group> groups_;                      // arbiter-major
    std::vector<std::array<std::int32_t, kNeuronTypes>> acc_; // per slot
    std::uint64_t cam_lookups_{0};
    std::uint64_t bypass_hits_{0};
};

} // namespace cortex
