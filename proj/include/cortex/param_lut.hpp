// param_lut.hpp: range-CAM lookup from minicolumn addresses to neuron
// parameters and connection rules, with two-level buffer indirection.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cortex/core.hpp"
#include "cortex/neuron.hpp"

namespace cortex
{

inline constexpr int kConnectionSlots = 16;
inline constexpr int kDelayClasses = 16;

struct PostSlot
{
    bool enabled{false};
    std::uint8_t delay_class{1}; // 1..16 ms

    constexpr bool operator==(const PostSlot &) const = default;
};

/// Post-connection record: which of the 16 outgoing hypercolumn connections
/// are used, and their axonal delay.
struct PostConnection
{
    std::array<PostSlot, kConnectionSlots> slots{};

    [[nodiscard]] int enabled_count() const;
    constexpr bool operator==(const PostConnection &) const = default;
};

/// Pre-connection plus neuron-connection record for one (range, slot).
/// masks[d] bit s enables source type s onto destination type d.
struct ConnectionRule
{
    std::uint32_t offset{0}; // 20-bit hypercolumn offset, wraps
    int fanout_size{1};
    int dest_hc_size{1};
    TypeWeights weights{};
    std::array<std::uint8_t, kNeuronTypes> masks{};

    constexpr bool operator==(const ConnectionRule &) const = default;
};

/// Sorted thresholds A_i; range i covers [A_i, A_{i+1}).
class RangeCam
{
public:
    static constexpr std::size_t kCapacity = 512;

    RangeCam() = default;
    /// Throws std::invalid_argument unless thresholds are non-empty, start
    /// at 0, are strictly increasing, fit in 27 bits and number <= 512.
    explicit RangeCam(std::vector<std::uint32_t> thresholds);

    [[nodiscard]] std::size_t lookup(MiniAddr addr) const;
    [[nodiscard]] std::size_t size() const { return thresholds_.size(); }
    [[nodiscard]] const std::vector<std::uint32_t> &thresholds() const { return thresholds_; }

private:
    std::vector<std::uint32_t> thresholds_;
};

struct RangeEntry
{
    std::size_t param_index{0};
    std::size_t conn_index{0};
};

struct ConnectionSet
{
    PostConnection post;
    std::array<ConnectionRule, kConnectionSlots> rules{}; // meaningful for enabled slots only
};

/// Immutable lookup tables. All cross-references are checked on
/// construction, so lookups never fail at run time.
class ParamLut
{
public:
    ParamLut(RangeCam cam, std::vector<RangeEntry> ranges, std::vector<MinicolumnParams> params,
            std::vector<ConnectionSet> connections, std::uint64_t network_seed);

    [[nodiscard]] std::size_t cam_lookup(MiniAddr addr) const { return cam_.lookup(addr); }
    [[nodiscard]] const MinicolumnParams &minicolumn_params(MiniAddr addr) const;
    [[nodiscard]] const PostConnection &post_connections(MiniAddr addr) const;
    /// Throws std::logic_error if the slot is not enabled for addr's range.
    [[nodiscard]] const ConnectionRule &pre_connection(MiniAddr addr, int slot) const;

    [[nodiscard]] std::uint64_t network_seed() const { return network_seed_; }
    [[nodiscard]] const RangeCam &cam() const { return cam_; }
    [[nodiscard]] std::size_t range_count() const { return ranges_.size(); }
    [[nodiscard]] const RangeEntry &range(std::size_t i) const { return ranges_[i]; }
    [[nodiscard]] const ConnectionSet &connection_set(std::size_t i) const { return connections_[i]; }

private:
    RangeCam cam_;
    std::vector<RangeEntry> ranges_;
    std::vector<MinicolumnParams> params_;
    std::vector<ConnectionSet> connections_;
    std::uint64_t network_seed_;
};

} // namespace cortex
