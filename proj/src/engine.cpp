#include "cortex/engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

namespace cortex
{

void EngineConfig::validate() const
{
    if (tm_minicolumns == 0 || tm_minicolumns % kSegmentSize != 0)
    {
        throw std::invalid_argument("tm_minicolumns must be a positive multiple of 1024");
    }
    if (tm_minicolumns > (std::size_t{1} << 20))
    {
        throw std::invalid_argument("tm_minicolumns must not exceed 2^20");
    }
    if (opportunities_per_segment < 1)
    {
        throw std::invalid_argument("at least one axon opportunity per segment is required");
    }
    if (workers == 0)
    {
        throw std::invalid_argument("worker count must be positive");
    }
    for (const auto &r : monitor)
    {
        if (r.first > r.last)
        {
            throw std::invalid_argument("monitor range has first > last");
        }
    }
}

int calibrated_gate(std::size_t opportunities_per_step)
{
    const auto th = delay_thresholds();
    const double p1 = th.R[0] / 1048576.0;
    const double selections = static_cast<double>(opportunities_per_step) * p1;
    if (selections <= 1.0)
    {
        return 0;
    }
    const double f = 1024.0 - 1024.0 / selections;
    return std::clamp(static_cast<int>(std::lround(f)), 0, 1023);
}

double hw_time_model(std::size_t tm_minicolumns, std::uint32_t slot_cycles, double clock_ns)
{
    return (static_cast<double>(tm_minicolumns) / 1024.0) * (1024.0 + slot_cycles) * clock_ns;
}

StateStore::StateStore(std::size_t slots)
    : front_(slots * kNeuronsPerMinicolumn, 0), back_(slots * kNeuronsPerMinicolumn, 0)
{
}

std::span<const std::uint8_t, kNeuronsPerMinicolumn> StateStore::current(std::uint32_t slot) const
{
    return std::span<const std::uint8_t, kNeuronsPerMinicolumn>(
            front_.data() + std::size_t{slot} * kNeuronsPerMinicolumn, kNeuronsPerMinicolumn);
}

std::span<std::uint8_t, kNeuronsPerMinicolumn> StateStore::next(std::uint32_t slot)
{
    return std::span<std::uint8_t, kNeuronsPerMinicolumn>(
            back_.data() + std::size_t{slot} * kNeuronsPerMinicolumn, kNeuronsPerMinicolumn);
}

std::span<const std::uint8_t, kNeuronsPerMinicolumn> StateStore::next_view(std::uint32_t slot) const
{
    return std::span<const std::uint8_t, kNeuronsPerMinicolumn>(
            back_.data() + std::size_t{slot} * kNeuronsPerMinicolumn, kNeuronsPerMinicolumn);
}

void StateStore::assign(std::uint32_t slot, const MinicolumnState &state)
{
    const std::size_t base = std::size_t{slot} * kNeuronsPerMinicolumn;
    std::copy(state.begin(), state.end(), front_.begin() + static_cast<std::ptrdiff_t>(base));
    std::copy(state.begin(), state.end(), back_.begin() + static_cast<std::ptrdiff_t>(base));
}

struct Engine::Worker
{
    explicit Worker(unsigned n) : arena(static_cast<int>(n)) {}

    tbb::task_arena arena;

    // per-segment scratch
    std::vector<std::uint32_t> slots;
    std::vector<MiniAddr> addrs;
    std::vector<TypeWeights> inputs;
    std::vector<const MinicolumnParams *> params;
    std::vector<MinicolumnOutput> outputs;
};

Engine::Engine(EngineConfig config, std::shared_ptr<const ParamLut> lut)
    : config_((config.validate(), std::move(config))), lut_(std::move(lut)),
      axon_(config_.axon, *lut_, RngStream::derive(config_.seed, 0xA7017ull)),
      arbiters_(config_.tm_minicolumns / (ArbiterBank::kArbiters * ArbiterBank::kLanes), config_.arbiter_bypass),
      states_(config_.tm_minicolumns), input_seen_(config_.tm_minicolumns, 0),
      worker_(std::make_unique<Worker>(config_.workers))
{
    current_.time_ms = 0;
}

Engine::~Engine() = default;

void Engine::inject(std::span<const StimulusEvent> events)
{
    std::uint32_t last = pending_.empty() ? time_ : pending_.back().time_ms;
    for (const auto &e : events)
    {
        if (e.time_ms < last)
        {
            throw std::invalid_argument("stimulus events out of order at t=" + std::to_string(e.time_ms));
        }
        last = e.time_ms;
    }
    pending_.insert(pending_.end(), events.begin(), events.end());
}

bool Engine::monitored(MiniAddr a) const
{
    if (config_.monitor.empty())
    {
        return true;
    }
    return std::any_of(config_.monitor.begin(), config_.monitor.end(),
            [a](const AddrRange &r) { return r.contains(a); });
}

const MinicolumnState &Engine::rest_for(MiniAddr addr)
{
    const MinicolumnParams *p = &lut_->minicolumn_params(addr);
    for (const auto &[key, state] : rest_cache_)
    {
        if (key == p)
        {
            return state;
        }
    }
    rest_cache_.emplace_back(p, rest_state(*p));
    return rest_cache_.back().second;
}

void Engine::deliver(const DelayedEvent &ev)
{
    const ConnectionRule &rule = lut_->pre_connection(ev.source, ev.slot);
    const TypeWeights w = modulate(ev.counts, rule);
    if (std::all_of(w.begin(), w.end(), [](Code4 c) { return c.code == 0; }))
    {
        return; // masked out entirely; nothing to assign
    }
    const DestinationList dests = map_destinations(ev, rule, lut_->network_seed());
    for (const MiniAddr dest : dests)
    {
        const AccumulateResult r = arbiters_.accumulate(PreSynapticContribution{dest, w});
        ++contributions_;
        ++current_.contributions;
        if (r.newly_bound)
        {
            states_.assign(r.slot, rest_for(dest));
        }
    }
}

void Engine::opportunity(bool stall)
{
    rx_buffer_.clear();
    axon_.opportunity(rx_buffer_);
    ++current_.opportunities;
    if (stall)
    {
        ++current_.stall_opportunities;
    }
    for (const DelayedEvent &ev : rx_buffer_)
    {
        deliver(ev);
    }
}

void Engine::process_segment(std::size_t segment, RecordSink *sink)
{
    Worker &wk = *worker_;
    wk.slots.clear();
    const std::size_t first_group = segment * EngineConfig::kSegmentSize / ArbiterBank::kLanes;
    const std::size_t last_group = first_group + EngineConfig::kSegmentSize / ArbiterBank::kLanes;
    for (std::size_t g = first_group; g < last_group; ++g)
    {
        const std::uint8_t lanes = arbiters_.lane_mask(static_cast<std::uint32_t>(g));
        for (std::uint32_t lane = 0; lanes != 0 && lane < ArbiterBank::kLanes; ++lane)
        {
            if ((lanes >> lane) & 1u)
            {
                wk.slots.push_back(static_cast<std::uint32_t>(g * ArbiterBank::kLanes + lane));
            }
        }
    }
    if (wk.slots.empty())
    {
        return;
    }

    const std::size_t n = wk.slots.size();
    wk.addrs.resize(n);
    wk.inputs.resize(n);
    wk.params.resize(n);
    wk.outputs.resize(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        const FlushResult f = arbiters_.flush(wk.slots[i]);
        wk.addrs[i] = f.addr;
        wk.inputs[i] = f.w;
        wk.params[i] = &lut_->minicolumn_params(f.addr);
        const bool nonzero = std::any_of(f.w.begin(), f.w.end(), [](Code4 c) { return c.code != 0; });
        input_seen_[wk.slots[i]] = nonzero ? 1 : 0;
        if (flush_observer_)
        {
            flush_observer_(time_, f.addr, f.w);
        }
    }

    const std::uint32_t t = time_;
    const std::uint64_t seed = config_.seed;
    auto compute = [&](std::size_t i) {
        const std::uint32_t slot = wk.slots[i];
        RngStream rng = RngStream::derive(seed, slot, t);
        wk.outputs[i] = minicolumn_step(states_.current(slot), states_.next(slot), *wk.params[i], wk.inputs[i], rng);
    };
    if (config_.workers > 1 && n > 1)
    {
        wk.arena.execute([&] {
            tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 8), [&](const tbb::blocked_range<std::size_t> &r) {
                for (std::size_t i = r.begin(); i != r.end(); ++i)
                {
                    compute(i);
                }
            });
        });
    }
    else
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            compute(i);
        }
    }

    // merge in slot order
    current_.processed_minicolumns += n;
    neuron_updates_ += n * kNeuronsPerMinicolumn;
    for (std::size_t i = 0; i < n; ++i)
    {
        const MinicolumnOutput &out = wk.outputs[i];
        const MiniAddr addr = wk.addrs[i];
        const bool watch = sink != nullptr && monitored(addr);
        if (out.spikes.any())
        {
            if (watch)
            {
                sink->on_spikes(t, addr, out.spikes);
                current_.monitored_spikes += static_cast<std::uint64_t>(out.spikes.popcount());
            }
        }
        if (!out.any_counts())
        {
            continue;
        }
        for (auto c : out.counts)
        {
            current_.spike_count_sum += c.count;
        }
        if (watch)
        {
            sink->on_event(t, addr, out.counts);
        }
        while (axon_.staging_full())
        {
            opportunity(true);
        }
        axon_.stage_internal(Event{addr, out.counts});
        ++current_.events_staged;
    }
}

void Engine::release_quiescent()
{
    const std::size_t groups = arbiters_.slot_count() / ArbiterBank::kLanes;
    for (std::size_t g = 0; g < groups; ++g)
    {
        const std::uint8_t lanes = arbiters_.lane_mask(static_cast<std::uint32_t>(g));
        if (lanes == 0)
        {
            continue;
        }
        for (std::uint32_t lane = 0; lane < ArbiterBank::kLanes; ++lane)
        {
            if (((lanes >> lane) & 1u) == 0)
            {
                continue;
            }
            const auto slot = static_cast<std::uint32_t>(g * ArbiterBank::kLanes + lane);
            if (input_seen_[slot] != 0 || !arbiters_.pending_zero(slot))
            {
                continue;
            }
            const MiniAddr addr = arbiters_.address(slot);
            if (at_rest(states_.next_view(slot), lut_->minicolumn_params(addr)))
            {
                arbiters_.release(slot);
            }
        }
    }
}

StepStats Engine::run_step(RecordSink *sink)
{
    current_ = StepStats{};
    current_.time_ms = time_;
    const AxonCounters before = axon_.counters();

    while (!pending_.empty() && pending_.front().time_ms <= time_)
    {
        axon_.stage_external(pending_.front().event);
        ++current_.events_staged;
        pending_.pop_front();
    }

    for (std::size_t seg = 0; seg < config_.segments(); ++seg)
    {
        for (int k = 0; k < config_.opportunities_per_segment; ++k)
        {
            opportunity(false);
        }
        while (axon_.backpressure())
        {
            opportunity(true);
        }
        process_segment(seg, sink);
    }

    release_quiescent();
    std::fill(input_seen_.begin(), input_seen_.end(), 0);
    states_.swap();

    const AxonCounters &after = axon_.counters();
    current_.placements = after.placements - before.placements;
    current_.events_delivered = after.delivered - before.delivered;
    current_.active_tm_minicolumns = arbiters_.bound_slots();
    for (int a = 0; a < ArbiterBank::kArbiters; ++a)
    {
        current_.arbiter_occupancy[a] = arbiters_.bound_slots(a);
    }
    if (sink != nullptr)
    {
        sink->on_stats(current_);
    }
    ++time_;
    return current_;
}

StepStats Engine::run(std::size_t steps, RecordSink *sink)
{
    StepStats last{};
    for (std::size_t i = 0; i < steps; ++i)
    {
        last = run_step(sink);
    }
    return last;
}

void Engine::seed_state(MiniAddr addr, const MinicolumnState &state)
{
    const AccumulateResult r = arbiters_.accumulate(PreSynapticContribution{addr, TypeWeights{}});
    states_.assign(r.slot, state);
}

double Engine::class_delay_steps(int delay_class) const
{
    return axon_.mean_residence(delay_class) / static_cast<double>(config_.opportunities_per_step());
}

std::string Engine::diagnostics() const
{
    std::ostringstream os;
    os << "t=" << time_ << " bound TM minicolumns=" << arbiters_.bound_slots() << "/" << arbiters_.slot_count()
       << "\n";
    for (int a = 0; a < ArbiterBank::kArbiters; ++a)
    {
        os << "  arbiter " << a << ": groups " << arbiters_.bound_groups(a) << "/" << arbiters_.groups_per_arbiter()
           << ", slots " << arbiters_.bound_slots(a) << "\n";
    }
    os << "  delay store: " << axon_.store().total_size() << " placements queued, "
       << axon_.write_buffer().total_size() << " awaiting write";
    return os.str();
}

} // namespace cortex
