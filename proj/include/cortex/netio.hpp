// netio.hpp: network and stimulus text formats, spike/event/stats record
// streams, the auditory-cortex generator and the figure-data reducer.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cortex/engine.hpp"
#include "cortex/param_lut.hpp"

namespace cortex::netio
{

/// Parse or validation failure; line() is 1-based, 0 when not tied to a line.
class FormatError : public std::runtime_error
{
public:
    FormatError(std::string source, int line, const std::string &message);
    [[nodiscard]] int line() const { return line_; }

private:
    int line_;
};

// Text-level network description. `line` records where an entry was read
// and is ignored by comparisons.

struct RangeLine
{
    std::uint32_t start{0};
    std::uint32_t param_type_id{0};
    std::uint32_t conn_id{0};
    int line{0};
    bool operator==(const RangeLine &o) const
    {
        return start == o.start && param_type_id == o.param_type_id && conn_id == o.conn_id;
    }
};

struct TypeLine
{
    std::uint32_t param_type_id{0};
    int slot{0};
    int count{0};
    double tau_epsc{5.8};
    double tau_ipsc{5.8};
    double tau_mem{5.8};
    double tau_rfc{3.0};
    double g_syn{1.0};
    double g_psc{1.0};
    int v_init{0};
    int v_reset{-4};
    int line{0};
    bool operator==(const TypeLine &o) const
    {
        return param_type_id == o.param_type_id && slot == o.slot && count == o.count && tau_epsc == o.tau_epsc &&
                tau_ipsc == o.tau_ipsc && tau_mem == o.tau_mem && tau_rfc == o.tau_rfc && g_syn == o.g_syn &&
                g_psc == o.g_psc && v_init == o.v_init && v_reset == o.v_reset;
    }
};

struct ConnLine
{
    std::uint32_t conn_id{0};
    int line{0};
    bool operator==(const ConnLine &o) const { return conn_id == o.conn_id; }
};

struct PostLine
{
    std::uint32_t conn_id{0};
    int slot{0};
    int delay_ms{1};
    int line{0};
    bool operator==(const PostLine &o) const
    {
        return conn_id == o.conn_id && slot == o.slot && delay_ms == o.delay_ms;
    }
};

struct PreLine
{
    std::uint32_t conn_id{0};
    int slot{0};
    std::uint32_t offset{0};
    int fanout{1};
    int dest_hc_size{1};
    int line{0};
    bool operator==(const PreLine &o) const
    {
        return conn_id == o.conn_id && slot == o.slot && offset == o.offset && fanout == o.fanout &&
                dest_hc_size == o.dest_hc_size;
    }
};

struct WeightsLine
{
    std::uint32_t conn_id{0};
    int slot{0};
    std::array<int, kNeuronTypes> weights{};
    int line{0};
    bool operator==(const WeightsLine &o) const
    {
        return conn_id == o.conn_id && slot == o.slot && weights == o.weights;
    }
};

struct MasksLine
{
    std::uint32_t conn_id{0};
    int slot{0};
    std::array<std::uint8_t, kNeuronTypes> masks{};
    int line{0};
    bool operator==(const MasksLine &o) const
    {
        return conn_id == o.conn_id && slot == o.slot && masks == o.masks;
    }
};

struct NetworkDescription
{
    std::uint64_t seed{0};
    std::vector<RangeLine> ranges;
    std::vector<TypeLine> types;
    std::vector<ConnLine> conns; // connection ids with no enabled slot
    std::vector<PostLine> posts;
    std::vector<PreLine> pres;
    std::vector<WeightsLine> weights;
    std::vector<MasksLine> masks;

    bool operator==(const NetworkDescription &) const = default;
};

/// Syntax and per-field checks. Throws FormatError naming the line.
NetworkDescription parse_network(std::string_view text, const std::string &source = "<network>");
NetworkDescription read_network_file(const std::string &path);
std::string serialize_network(const NetworkDescription &net);

/// Cross-reference checks and conversion to lookup tables. Throws
/// FormatError naming the offending line.
std::shared_ptr<const ParamLut> build_lut(const NetworkDescription &net, const std::string &source = "<network>");

// Stimulus: `ev <time_ms> <addr_hex7> <c0> ... <c7>`, sorted by time.
std::vector<StimulusEvent> parse_stimulus(std::string_view text, const std::string &source = "<stimulus>");
std::vector<StimulusEvent> read_stimulus_file(const std::string &path);
std::string serialize_stimulus(const std::vector<StimulusEvent> &events);

std::string hex_addr(MiniAddr a);
std::string hex_bitmap(const SpikeBitmap &b);

/// Writes `time_ms,addr,bitmap_hex25`, `time_ms,addr,type,count` and
/// `time_ms,active_tm_minicolumns` records. Null streams are skipped.
class CsvRecordSink : public RecordSink
{
public:
    CsvRecordSink(std::ostream *spikes, std::ostream *events, std::ostream *stats);

    void on_spikes(std::uint32_t time_ms, MiniAddr addr, const SpikeBitmap &spikes) override;
    void on_event(std::uint32_t time_ms, MiniAddr addr, const TypeCounts &counts) override;
    void on_stats(const StepStats &stats) override;

private:
    std::ostream *spikes_;
    std::ostream *events_;
    std::ostream *stats_;
};

struct EventRecord
{
    std::uint32_t time_ms{0};
    MiniAddr addr;
    int type{0};
    int count{0};
};

struct StatsRecord
{
    std::uint32_t time_ms{0};
    std::size_t active{0};
};

std::vector<EventRecord> parse_event_records(std::string_view text);
std::vector<StatsRecord> parse_stats_records(std::string_view text);

// Auditory-cortex experiment.

struct AuditoryOptions
{
    int channels = 10;
    int hypercolumns = 10;
    std::uint64_t seed = 1;
    int sweep_ms = 10;
    int repeats = 10;
    /// Source rate averaged over a 100-window sweep; the in-window Poisson
    /// rate per ms is rate_hz * 100 / 1000.
    double rate_hz = 10.0;
    int intra_delay_ms = 1;
    int inter_delay_ms = 2;
};

/// Address plan. Channel c occupies hypercolumns [c*stride, c*stride + H);
/// its 10 Poisson sources sit at hypercolumns c*stride + H + k, minicolumn 0,
/// and source k drives hypercolumn k of the channel.
struct AuditoryLayout
{
    static constexpr int kSourcesPerChannel = 10;
    static constexpr int kMinicolumns = 100;
    static constexpr std::array<int, 6> kCounts{32, 8, 16, 4, 32, 8};
    static constexpr std::array<int, 3> kExcitatoryTypes{0, 2, 4};
    static constexpr std::array<int, 3> kInhibitoryTypes{1, 3, 5};

    int channels = 10;
    int hypercolumns = 10;

    /// Throws std::invalid_argument for unsupported sizes.
    void validate() const;
    [[nodiscard]] std::uint32_t stride() const { return (1u << 20) / static_cast<std::uint32_t>(channels); }
    [[nodiscard]] MiniAddr cortex_addr(int channel, int hyper, int mini) const;
    [[nodiscard]] MiniAddr source_addr(int channel, int source) const;
    /// Channel of a cortical minicolumn, -1 for source or unused addresses.
    [[nodiscard]] int channel_of(MiniAddr a) const;
    [[nodiscard]] bool is_source(MiniAddr a) const;
    [[nodiscard]] std::size_t cortical_minicolumns() const;
};

struct AuditoryNetwork
{
    NetworkDescription network;
    std::vector<StimulusEvent> stimulus;
};

AuditoryNetwork gen_auditory(const AuditoryOptions &opts);

/// First window of a channel within one sweep.
[[nodiscard]] inline std::uint32_t window_start(const AuditoryOptions &o, int repeat, int channel)
{
    return static_cast<std::uint32_t>((repeat * o.channels + channel) * o.sweep_ms);
}

struct FigureData
{
    int channels{0};
    int bins{0};
    int bin_ms{10};
    std::vector<double> excitatory; // channels x bins, row-major, max-normalized
    std::vector<double> inhibitory;
    std::vector<StatsRecord> active;
};

/// Channel x time mean-rate grids (normalized separately for excitatory and
/// inhibitory types) and the active-minicolumn trace.
FigureData emit_figures(const std::vector<EventRecord> &events, const std::vector<StatsRecord> &stats,
        const AuditoryLayout &layout, int bin_ms, std::uint32_t duration_ms);

std::string grid_csv(const FigureData &fig, const std::vector<double> &grid);
std::string active_csv(const FigureData &fig, std::size_t cortical_minicolumns);

std::string read_file(const std::string &path);

} // namespace cortex::netio
