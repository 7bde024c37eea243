// axon.hpp: two-phase axonal delay. TX appends events into 16 delay-class
// queues; RX reads them back stochastically with class probabilities
// P_i = P_1/i and a global gate f, so mean residence scales with the class.
#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cortex/core.hpp"
#include "cortex/param_lut.hpp"

namespace cortex
{

struct DelayedEvent
{
    MiniAddr source;
    TypeCounts counts{};
    std::uint8_t slot{0};        // connection slot 0..15
    std::uint8_t delay_class{1}; // 1..16
    std::uint64_t stamp{0};      // opportunity index at enqueue
};

/// Odd delay classes live in bank A, even ones in bank B.
enum class Bank : std::uint8_t
{
    A,
    B,
};

[[nodiscard]] constexpr Bank bank_of(int delay_class)
{
    return (delay_class % 2 != 0) ? Bank::A : Bank::B;
}

class ClassFull : public std::runtime_error
{
public:
    explicit ClassFull(int delay_class);
    [[nodiscard]] int delay_class() const { return delay_class_; }

private:
    int delay_class_;
};

/// 16 bounded FIFO queues, one per delay class.
class DelayStore
{
public:
    static constexpr std::size_t kDefaultCapacity = std::size_t{1} << 20;

    explicit DelayStore(std::size_t capacity_per_class = kDefaultCapacity);

    [[nodiscard]] std::size_t size(int delay_class) const { return queues_[delay_class - 1].size(); }
    [[nodiscard]] std::size_t capacity() const { return capacity_; }
    [[nodiscard]] std::size_t total_size() const;
    [[nodiscard]] bool empty() const { return total_size() == 0; }

    /// True if every enabled slot of `post` fits.
    [[nodiscard]] bool can_accept(const PostConnection &post) const;
    /// Throws ClassFull if the event's class queue is at capacity.
    void push(const DelayedEvent &ev);
    /// Moves up to `max` events from the head of a class queue into `out`.
    std::size_t pop(int delay_class, std::size_t max, std::vector<DelayedEvent> &out);

private:
    std::size_t capacity_;
    std::array<std::deque<DelayedEvent>, kDelayClasses> queues_;
};

struct DelayThresholds
{
    std::array<std::uint32_t, kDelayClasses> R{};     // 20-bit class weights
    std::array<std::uint32_t, kDelayClasses + 1> T{}; // cumulative, T[0] = 0
};

/// R_i = round(2^20 * P_1 / i) with P_1 = 1/H_16; T is the running sum.
DelayThresholds delay_thresholds();

/// Class selector plus the 10-bit global gate f.
class DelayGenerator
{
public:
    explicit DelayGenerator(int gate_f = 0);

    [[nodiscard]] int gate() const { return gate_; }
    [[nodiscard]] const DelayThresholds &thresholds() const { return thresholds_; }

    /// Read-out is enabled when f <= u10.
    [[nodiscard]] bool gate_open(std::uint32_t u10) const { return static_cast<std::uint32_t>(gate_) <= u10; }
    /// Class i with T[i-1] <= u20 < T[i]; 0 when u20 falls past T[16].
    [[nodiscard]] int select_class(std::uint32_t u20) const;

private:
    int gate_;
    DelayThresholds thresholds_;
};

/// Placements produced by one TX enqueue (at most one per slot).
struct Placements
{
    std::array<DelayedEvent, kConnectionSlots> items{};
    int count{0};
    std::optional<Bank> last_bank;
};

/// Appends one DelayedEvent per enabled slot of `post` to its class queue.
/// All-or-nothing: throws ClassFull without placing anything if any target
/// queue is full.
Placements tx_enqueue(const Event &ev, const PostConnection &post, DelayStore &store, std::uint64_t stamp);

struct RxResult
{
    bool gate_open{false};
    int selected_class{0}; // 0 = none
    std::size_t count{0};
    int written_class{0}; // class the preceding TX phase wrote, 0 = none
};

/// Moves up to `burst` events from the fullest class of `buffer` (lowest
/// class on ties) into `store`, bounded by the store's free space. Returns
/// the class written, 0 if nothing moved.
int tx_write(DelayStore &buffer, DelayStore &store, std::size_t burst);

/// One read-out opportunity. Draws u10 for the gate, then u20 for the class,
/// and dequeues up to `burst` events from that class. A class in the
/// `blocked` bank (the one TX wrote in this opportunity) yields nothing.
RxResult rx_opportunity(const DelayGenerator &gen, DelayStore &store, RngStream &rng, std::size_t burst,
        std::optional<Bank> blocked, std::vector<DelayedEvent> &out);

/// Bounded TX staging FIFO with the 95% backpressure threshold.
class TxStage
{
public:
    explicit TxStage(std::size_t capacity);

    [[nodiscard]] std::size_t size() const { return fifo_.size(); }
    [[nodiscard]] std::size_t capacity() const { return capacity_; }
    [[nodiscard]] bool full() const { return fifo_.size() >= capacity_; }
    [[nodiscard]] bool empty() const { return fifo_.empty(); }
    /// Occupancy above 95% of capacity.
    [[nodiscard]] bool backpressure() const { return fifo_.size() * 100 > capacity_ * 95; }

    /// Throws std::logic_error when full; producers must stall first.
    void push(const Event &ev);
    [[nodiscard]] const Event &front() const { return fifo_.front(); }
    void pop() { fifo_.pop_front(); }

private:
    std::size_t capacity_;
    std::deque<Event> fifo_;
};

struct AxonConfig
{
    std::size_t class_capacity = DelayStore::kDefaultCapacity;
    std::size_t staging_capacity = 4096;
    std::size_t write_capacity = 4096; // per-class write buffer
    std::size_t tx_budget = 1024;      // staged events split into placements per TX phase
    std::size_t tx_burst = 1024;       // placements written to the store per TX phase
    std::size_t rx_burst = 64;         // placements read per RX phase
    int gate_f = 0;
};

struct AxonCounters
{
    std::uint64_t opportunities{0};
    std::uint64_t gate_openings{0};
    std::uint64_t events_staged{0};
    std::uint64_t events_dropped{0}; // no enabled slot
    std::uint64_t placements{0};
    std::uint64_t delivered{0};
    std::array<std::uint64_t, kDelayClasses> delivered_by_class{};
    std::array<std::uint64_t, kDelayClasses> residence_sum{}; // in opportunities
};

/// The axon array: staging, the external holding queue, per-class write
/// buffers, the delay store and the delay generator, driven one opportunity
/// at a time. Each TX phase writes one class, so it touches one bank and the
/// RX phase reads only from the other.
class AxonArray
{
public:
    AxonArray(const AxonConfig &config, const ParamLut &lut, RngStream rng);

    [[nodiscard]] bool backpressure() const { return staging_.backpressure(); }
    [[nodiscard]] bool staging_full() const { return staging_.full(); }
    void stage_internal(const Event &ev);
    /// External events wait until internal staging is empty.
    void stage_external(const Event &ev);

    /// TX phase then RX phase. Delivered events are appended to `rx_out`.
    RxResult opportunity(std::vector<DelayedEvent> &rx_out);

    /// Nothing staged, held or in flight.
    [[nodiscard]] bool idle() const;
    [[nodiscard]] const AxonCounters &counters() const { return counters_; }
    [[nodiscard]] const DelayStore &store() const { return store_; }
    [[nodiscard]] const DelayStore &write_buffer() const { return buffer_; }
    [[nodiscard]] const DelayGenerator &generator() const { return generator_; }
    /// Mean residence of delivered events of a class, in opportunities.
    [[nodiscard]] double mean_residence(int delay_class) const;

private:
    int tx_phase();

    AxonConfig config_;
    const ParamLut &lut_;
    RngStream rng_;
    DelayStore buffer_;
    DelayStore store_;
    DelayGenerator generator_;
    TxStage staging_;
    std::deque<Event> external_;
    AxonCounters counters_;
};

} // namespace cortex
