#include "cortex/axon.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cortex
{

ClassFull::ClassFull(int delay_class)
    : std::runtime_error("delay class " + std::to_string(delay_class) + " queue is full"),
      delay_class_(delay_class)
{
}

DelayStore::DelayStore(std::size_t capacity_per_class) : capacity_(capacity_per_class)
{
    if (capacity_ == 0)
    {
        throw std::invalid_argument("delay queue capacity must be positive");
    }
}

std::size_t DelayStore::total_size() const
{
    std::size_t n = 0;
    for (const auto &q : queues_)
    {
        n += q.size();
    }
    return n;
}

bool DelayStore::can_accept(const PostConnection &post) const
{
    std::array<std::size_t, kDelayClasses> wanted{};
    for (const auto &s : post.slots)
    {
        if (s.enabled)
        {
            ++wanted[s.delay_class - 1];
        }
    }
    for (int c = 0; c < kDelayClasses; ++c)
    {
        if (queues_[c].size() + wanted[c] > capacity_)
        {
            return false;
        }
    }
    return true;
}

void DelayStore::push(const DelayedEvent &ev)
{
    auto &q = queues_.at(ev.delay_class - 1);
    if (q.size() >= capacity_)
    {
        throw ClassFull(ev.delay_class);
    }
    q.push_back(ev);
}

std::size_t DelayStore::pop(int delay_class, std::size_t max, std::vector<DelayedEvent> &out)
{
    auto &q = queues_.at(delay_class - 1);
    const std::size_t n = std::min(max, q.size());
    out.insert(out.end(), q.begin(), q.begin() + static_cast<std::ptrdiff_t>(n));
    q.erase(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(n));
    return n;
}

DelayThresholds delay_thresholds()
{
    double harmonic = 0.0;
    for (int i = 1; i <= kDelayClasses; ++i)
    {
        harmonic += 1.0 / i;
    }
    const double p1 = 1.0 / harmonic;

    DelayThresholds th;
    th.T[0] = 0;
    for (int i = 1; i <= kDelayClasses; ++i)
    {
        th.R[i - 1] = static_cast<std::uint32_t>(std::lround(1048576.0 * p1 / i));
        th.T[i] = th.T[i - 1] + th.R[i - 1];
    }
    return th;
}

DelayGenerator::DelayGenerator(int gate_f) : gate_(gate_f), thresholds_(delay_thresholds())
{
    if (gate_f < 0 || gate_f > 1023)
    {
        throw std::out_of_range("gate f must be a 10-bit value");
    }
}

int DelayGenerator::select_class(std::uint32_t u20) const
{
    const auto &T = thresholds_.T;
    const auto it = std::upper_bound(T.begin() + 1, T.end(), u20);
    if (it == T.end())
    {
        return 0;
    }
    return static_cast<int>(it - T.begin());
}

Placements tx_enqueue(const Event &ev, const PostConnection &post, DelayStore &store, std::uint64_t stamp)
{
    if (!store.can_accept(post))
    {
        for (const auto &s : post.slots)
        {
            if (s.enabled && store.size(s.delay_class) >= store.capacity())
            {
                throw ClassFull(s.delay_class);
            }
        }
        throw ClassFull(0);
    }
    Placements placed;
    for (int slot = 0; slot < kConnectionSlots; ++slot)
    {
        const PostSlot &s = post.slots[slot];
        if (!s.enabled)
        {
            continue;
        }
        DelayedEvent d{ev.source, ev.counts, static_cast<std::uint8_t>(slot), s.delay_class, stamp};
        store.push(d);
        placed.items[placed.count++] = d;
        placed.last_bank = bank_of(s.delay_class);
    }
    return placed;
}

int tx_write(DelayStore &buffer, DelayStore &store, std::size_t burst)
{
    int fullest = 0;
    std::size_t most = 0;
    for (int c = 1; c <= kDelayClasses; ++c)
    {
        if (buffer.size(c) > most)
        {
            most = buffer.size(c);
            fullest = c;
        }
    }
    if (fullest == 0)
    {
        return 0;
    }
    const std::size_t room = store.capacity() - store.size(fullest);
    const std::size_t n = std::min({burst, room, most});
    if (n == 0)
    {
        return 0;
    }
    std::vector<DelayedEvent> moved;
    moved.reserve(n);
    buffer.pop(fullest, n, moved);
    for (const auto &d : moved)
    {
        store.push(d);
    }
    return fullest;
}

RxResult rx_opportunity(const DelayGenerator &gen, DelayStore &store, RngStream &rng, std::size_t burst,
        std::optional<Bank> blocked, std::vector<DelayedEvent> &out)
{
    RxResult result;
    if (!gen.gate_open(rng.draw10()))
    {
        return result;
    }
    result.gate_open = true;
    result.selected_class = gen.select_class(rng.draw20());
    if (result.selected_class == 0 || (blocked && bank_of(result.selected_class) == *blocked))
    {
        return result;
    }
    result.count = store.pop(result.selected_class, burst, out);
    return result;
}

TxStage::TxStage(std::size_t capacity) : capacity_(capacity)
{
    if (capacity_ == 0)
    {
        throw std::invalid_argument("staging capacity must be positive");
    }
}

void TxStage::push(const Event &ev)
{
    if (full())
    {
        throw std::logic_error("TX staging overflow: producer did not stall");
    }
    fifo_.push_back(ev);
}

AxonArray::AxonArray(const AxonConfig &config, const ParamLut &lut, RngStream rng)
    : config_(config), lut_(lut), rng_(rng), buffer_(config.write_capacity), store_(config.class_capacity),
      generator_(config.gate_f),
      staging_(config.staging_capacity)
{
    if (config_.rx_burst == 0 || config_.tx_budget == 0 || config_.tx_burst == 0)
    {
        throw std::invalid_argument("axon burst sizes must be positive");
    }
}

void AxonArray::stage_internal(const Event &ev)
{
    staging_.push(ev);
    ++counters_.events_staged;
}

void AxonArray::stage_external(const Event &ev)
{
    external_.push_back(ev);
    ++counters_.events_staged;
}

int AxonArray::tx_phase()
{
    for (std::size_t moved = 0; moved < config_.tx_budget; ++moved)
    {
        const bool internal = !staging_.empty();
        if (!internal && external_.empty())
        {
            break;
        }
        const Event &ev = internal ? staging_.front() : external_.front();
        const PostConnection &post = lut_.post_connections(ev.source);
        if (post.enabled_count() == 0)
        {
            ++counters_.events_dropped;
        }
        else
        {
            if (!buffer_.can_accept(post))
            {
                break; // producers stall until the write buffers drain
            }
            const Placements p = tx_enqueue(ev, post, buffer_, counters_.opportunities);
            counters_.placements += static_cast<std::uint64_t>(p.count);
        }
        if (internal)
        {
            staging_.pop();
        }
        else
        {
            external_.pop_front();
        }
    }
    return tx_write(buffer_, store_, config_.tx_burst);
}

RxResult AxonArray::opportunity(std::vector<DelayedEvent> &rx_out)
{
    const int written = tx_phase();
    const std::size_t before = rx_out.size();
    const std::optional<Bank> blocked = written == 0 ? std::nullopt : std::optional<Bank>(bank_of(written));
    RxResult rx = rx_opportunity(generator_, store_, rng_, config_.rx_burst, blocked, rx_out);
    rx.written_class = written;
    if (rx.gate_open)
    {
        ++counters_.gate_openings;
    }
    for (std::size_t i = before; i < rx_out.size(); ++i)
    {
        const DelayedEvent &d = rx_out[i];
        ++counters_.delivered;
        ++counters_.delivered_by_class[d.delay_class - 1];
        counters_.residence_sum[d.delay_class - 1] += counters_.opportunities - d.stamp;
    }
    ++counters_.opportunities;
    return rx;
}

bool AxonArray::idle() const
{
    return staging_.empty() && external_.empty() && buffer_.empty() && store_.empty();
}

double AxonArray::mean_residence(int delay_class) const
{
    const auto n = counters_.delivered_by_class.at(delay_class - 1);
    return n == 0 ? 0.0 : static_cast<double>(counters_.residence_sum[delay_class - 1]) / static_cast<double>(n);
}

} // namespace cortex
