// engine.hpp: the Master. Runs logical 1 ms steps over segments of 1024 TM
// minicolumns, interleaving axon opportunities between segments, with a
// double-buffered state store and backpressure on the TX staging FIFO.
#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cortex/axon.hpp"
#include "cortex/core.hpp"
#include "cortex/neuron.hpp"
#include "cortex/param_lut.hpp"
#include "cortex/synapse.hpp"

namespace cortex
{

/// Inclusive minicolumn address range.
struct AddrRange
{
    std::uint32_t first{0};
    std::uint32_t last{MiniAddr::kAddrMask};

    [[nodiscard]] constexpr bool contains(MiniAddr a) const { return a.raw >= first && a.raw <= last; }
};

struct EngineConfig
{
    static constexpr std::size_t kSegmentSize = 1024;

    std::size_t tm_minicolumns = 176 * kSegmentSize;
    int opportunities_per_segment = 1;
    AxonConfig axon{};
    std::uint64_t seed = 1;
    std::vector<AddrRange> monitor; // empty: everything is monitored
    unsigned workers = 1;
    bool arbiter_bypass = true;

    /// Throws std::invalid_argument on a bad configuration.
    void validate() const;
    [[nodiscard]] std::size_t segments() const { return tm_minicolumns / kSegmentSize; }
    [[nodiscard]] std::size_t opportunities_per_step() const
    {
        return segments() * static_cast<std::size_t>(opportunities_per_segment);
    }
};

/// Gate f making the class-1 mean wait about one step under light load:
/// opportunities * P_1 * (1024 - f) / 1024 = 1.
int calibrated_gate(std::size_t opportunities_per_step);

/// Modeled hardware wall time per step in ns:
/// (tm_minicolumns / 1024) * (1024 + slot_cycles) * clock_ns.
double hw_time_model(std::size_t tm_minicolumns, std::uint32_t slot_cycles, double clock_ns);

struct StimulusEvent
{
    std::uint32_t time_ms{0};
    Event event;
};

struct StepStats
{
    std::uint32_t time_ms{0};
    std::size_t active_tm_minicolumns{0};
    std::array<std::size_t, ArbiterBank::kArbiters> arbiter_occupancy{};
    std::size_t processed_minicolumns{0};
    std::uint64_t events_staged{0};
    std::uint64_t placements{0};
    std::uint64_t events_delivered{0};
    std::uint64_t contributions{0};
    std::uint64_t opportunities{0};
    std::uint64_t stall_opportunities{0};
    std::uint64_t spike_count_sum{0}; // sum of per-type counts emitted
    std::uint64_t monitored_spikes{0};
};

/// Receives per-step records from the coordinator.
class RecordSink
{
public:
    virtual ~RecordSink() = default;
    virtual void on_spikes(std::uint32_t time_ms, MiniAddr addr, const SpikeBitmap &spikes) = 0;
    virtual void on_event(std::uint32_t time_ms, MiniAddr addr, const TypeCounts &counts) = 0;
    virtual void on_stats(const StepStats &stats) = 0;
};

/// Per-TM-slot neuron state, current/next double buffer.
class StateStore
{
public:
    explicit StateStore(std::size_t slots);

    [[nodiscard]] std::span<const std::uint8_t, kNeuronsPerMinicolumn> current(std::uint32_t slot) const;
    [[nodiscard]] std::span<std::uint8_t, kNeuronsPerMinicolumn> next(std::uint32_t slot);
    [[nodiscard]] std::span<const std::uint8_t, kNeuronsPerMinicolumn> next_view(std::uint32_t slot) const;
    /// Initialise a freshly bound slot in both buffers.
    void assign(std::uint32_t slot, const MinicolumnState &state);
    void swap() { front_.swap(back_); }
    [[nodiscard]] std::size_t bytes_per_slot() const { return kNeuronsPerMinicolumn; }

private:
    std::vector<std::uint8_t> front_;
    std::vector<std::uint8_t> back_;
};

class Engine
{
public:
    using FlushObserver = std::function<void(std::uint32_t time_ms, MiniAddr addr, const TypeWeights &w)>;

    Engine(EngineConfig config, std::shared_ptr<const ParamLut> lut);
    ~Engine();
    Engine(const Engine &) = delete;
    Engine &operator=(const Engine &) = delete;

    /// Queue external events. Throws std::invalid_argument if they are not
    /// sorted by time or start before the current step.
    void inject(std::span<const StimulusEvent> events);

    /// Advance one logical step. Throws ArbiterFull when the activity bound
    /// is exceeded; the engine must not be stepped again after that.
    StepStats run_step(RecordSink *sink = nullptr);
    /// Run `steps` steps; returns the stats of the last one.
    StepStats run(std::size_t steps, RecordSink *sink = nullptr);

    /// Bind addr to a TM slot with the given state (diagnostics and tests).
    void seed_state(MiniAddr addr, const MinicolumnState &state);
    void set_flush_observer(FlushObserver obs) { flush_observer_ = std::move(obs); }

    [[nodiscard]] std::uint32_t time() const { return time_; }
    [[nodiscard]] const EngineConfig &config() const { return config_; }
    [[nodiscard]] const AxonArray &axon() const { return axon_; }
    [[nodiscard]] const ArbiterBank &arbiters() const { return arbiters_; }
    [[nodiscard]] const ParamLut &lut() const { return *lut_; }
    [[nodiscard]] std::uint64_t neuron_updates() const { return neuron_updates_; }
    [[nodiscard]] std::uint64_t contributions() const { return contributions_; }
    /// Realized mean delay of a delay class in steps (0 if none delivered).
    [[nodiscard]] double class_delay_steps(int delay_class) const;
    [[nodiscard]] double class1_delay_steps() const { return class_delay_steps(1); }
    /// Per-arbiter occupancy summary.
    [[nodiscard]] std::string diagnostics() const;

private:
    struct Worker;

    void opportunity(bool stall);
    void deliver(const DelayedEvent &ev);
    void process_segment(std::size_t segment, RecordSink *sink);
    void release_quiescent();
    [[nodiscard]] bool monitored(MiniAddr a) const;
    const MinicolumnState &rest_for(MiniAddr addr);

    EngineConfig config_;
    std::shared_ptr<const ParamLut> lut_;
    AxonArray axon_;
    ArbiterBank arbiters_;
    StateStore states_;
    std::vector<std::uint8_t> input_seen_; // per slot: nonzero W flushed this step
    std::deque<StimulusEvent> pending_;
    std::vector<DelayedEvent> rx_buffer_;
    std::vector<std::pair<const MinicolumnParams *, MinicolumnState>> rest_cache_;
    std::unique_ptr<Worker> worker_;
    FlushObserver flush_observer_;
    std::uint32_t time_{0};
    StepStats current_{};
    std::uint64_t neuron_updates_{0};
    std::uint64_t contributions_{0};
};

} // namespace cortex
