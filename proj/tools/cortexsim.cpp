// cortexsim: generate, validate, run and summarize cortical networks.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "cortex/engine.hpp"
#include "cortex/netio.hpp"

using namespace cortex;

namespace
{

void write_text(const std::string &path, const std::string &text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw std::runtime_error("cannot write " + path);
    }
    out << text;
}

std::unique_ptr<std::ofstream> open_optional(const std::string &path)
{
    if (path.empty())
    {
        return nullptr;
    }
    auto out = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*out)
    {
        throw std::runtime_error("cannot write " + path);
    }
    return out;
}

/// "first:last" in hex, inclusive.
AddrRange parse_monitor(const std::string &spec)
{
    const auto colon = spec.find(':');
    if (colon == std::string::npos)
    {
        throw CLI::ValidationError("--monitor", "expected FIRST:LAST in hex");
    }
    AddrRange r;
    r.first = static_cast<std::uint32_t>(std::stoul(spec.substr(0, colon), nullptr, 16));
    r.last = static_cast<std::uint32_t>(std::stoul(spec.substr(colon + 1), nullptr, 16));
    return r;
}

struct GenArgs
{
    netio::AuditoryOptions opts;
    std::string out;
    std::string stim;
};

struct RunArgs
{
    std::string net;
    std::string stim;
    std::size_t steps = 1000;
    std::uint64_t seed = 1;
    std::size_t tm = 176 * 1024;
    std::optional<int> f_gate;
    std::vector<std::string> monitor;
    std::string spikes;
    std::string events;
    std::string stats;
    unsigned workers = 1;
    std::size_t burst = AxonConfig{}.rx_burst;
    std::size_t tx_budget = AxonConfig{}.tx_budget;
    std::size_t tx_burst = AxonConfig{}.tx_burst;
    int opps = 1;
};

struct ReportArgs
{
    std::string events;
    std::string stats;
    int channels = 10;
    int hypercolumns = 10;
    int bin_ms = 10;
    std::uint32_t duration = 0;
    std::string out = "figure";
};

int cmd_gen(const GenArgs &a)
{
    const auto gen = netio::gen_auditory(a.opts);
    write_text(a.out, netio::serialize_network(gen.network));
    if (!a.stim.empty())
    {
        write_text(a.stim, netio::serialize_stimulus(gen.stimulus));
    }
    std::cout << "wrote " << a.out << " (" << gen.network.ranges.size() << " ranges)";
    if (!a.stim.empty())
    {
        std::cout << " and " << a.stim << " (" << gen.stimulus.size() << " events)";
    }
    std::cout << '\n';
    return 0;
}

int cmd_validate(const std::string &path)
{
    const auto net = netio::read_network_file(path);
    const auto lut = netio::build_lut(net, path);
    std::cout << path << ": ok, " << lut->range_count() << " ranges\n";
    return 0;
}

int cmd_run(const RunArgs &a)
{
    const auto lut = netio::build_lut(netio::read_network_file(a.net), a.net);
    std::vector<StimulusEvent> stim;
    if (!a.stim.empty())
    {
        stim = netio::read_stimulus_file(a.stim);
    }

    EngineConfig cfg;
    cfg.tm_minicolumns = a.tm;
    cfg.seed = a.seed;
    cfg.workers = a.workers;
    cfg.opportunities_per_segment = a.opps;
    cfg.axon.rx_burst = a.burst;
    cfg.axon.tx_budget = a.tx_budget;
    cfg.axon.tx_burst = a.tx_burst;
    for (const auto &m : a.monitor)
    {
        cfg.monitor.push_back(parse_monitor(m));
    }
    cfg.validate();
    cfg.axon.gate_f = a.f_gate ? *a.f_gate : calibrated_gate(cfg.opportunities_per_step());

    auto spikes = open_optional(a.spikes);
    auto events = open_optional(a.events);
    auto stats = open_optional(a.stats);
    netio::CsvRecordSink sink(spikes.get(), events.get(), stats.get());

    Engine engine(cfg, lut);
    engine.inject(stim);

    const auto t0 = std::chrono::steady_clock::now();
    try
    {
        engine.run(a.steps, &sink);
    }
    catch (const ArbiterFull &e)
    {
        std::cerr << "error at t=" << engine.time() << " ms: " << e.what() << '\n' << engine.diagnostics();
        return 3;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const double per_step_ns = hw_time_model(cfg.tm_minicolumns, 200, 5.0);
    std::printf("steps %zu  gate f %d  wall %.3f s\n", a.steps, cfg.axon.gate_f, wall);
    std::printf("neuron updates %llu  (%.3g per s)\n", static_cast<unsigned long long>(engine.neuron_updates()),
            wall > 0 ? static_cast<double>(engine.neuron_updates()) / wall : 0.0);
    std::printf("hardware model %.6f ms per step (%.1fx real time)\n", per_step_ns * 1e-6, 1e6 / per_step_ns);
    for (int c = 1; c <= kDelayClasses; ++c)
    {
        if (engine.axon().counters().delivered_by_class[c - 1] != 0)
        {
            std::printf("class-%d mean delay %.3f steps\n", c, engine.class_delay_steps(c));
        }
    }
    return 0;
}

int cmd_report(const ReportArgs &a)
{
    const auto events = netio::parse_event_records(netio::read_file(a.events));
    std::vector<netio::StatsRecord> stats;
    if (!a.stats.empty())
    {
        stats = netio::parse_stats_records(netio::read_file(a.stats));
    }
    std::uint32_t duration = a.duration;
    if (duration == 0)
    {
        for (const auto &r : events)
        {
            duration = std::max(duration, r.time_ms + 1);
        }
        if (!stats.empty())
        {
            duration = std::max(duration, stats.back().time_ms + 1);
        }
    }
    const netio::AuditoryLayout layout{a.channels, a.hypercolumns};
    layout.validate();
    const auto fig = netio::emit_figures(events, stats, layout, a.bin_ms, duration);
    write_text(a.out + "_exc.csv", netio::grid_csv(fig, fig.excitatory));
    write_text(a.out + "_inh.csv", netio::grid_csv(fig, fig.inhibitory));
    write_text(a.out + "_active.csv", netio::active_csv(fig, layout.cortical_minicolumns()));
    std::cout << "wrote " << a.out << "_{exc,inh,active}.csv (" << fig.channels << " x " << fig.bins << " bins)\n";
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"cortexsim: large-scale cortical network simulator"};
    app.require_subcommand(1);

    GenArgs gen;
    auto *g = app.add_subcommand("gen-auditory", "generate the auditory-cortex network and stimulus");
    g->add_option("--channels", gen.opts.channels, "cochlear channels")->check(CLI::Range(1, 128));
    g->add_option("--hypercolumns", gen.opts.hypercolumns, "hypercolumns per channel")->check(CLI::PositiveNumber);
    g->add_option("--seed", gen.opts.seed, "network and stimulus seed");
    g->add_option("--sweep-ms", gen.opts.sweep_ms, "window per channel")->check(CLI::PositiveNumber);
    g->add_option("--repeats", gen.opts.repeats, "number of sweeps")->check(CLI::NonNegativeNumber);
    g->add_option("--rate-hz", gen.opts.rate_hz, "mean source rate")->check(CLI::NonNegativeNumber);
    g->add_option("--intra-delay", gen.opts.intra_delay_ms, "within-hypercolumn delay, ms")->check(CLI::Range(1, 16));
    g->add_option("--inter-delay", gen.opts.inter_delay_ms, "neighbour delay, ms")->check(CLI::Range(1, 16));
    g->add_option("--out", gen.out, "network file")->required();
    g->add_option("--stim", gen.stim, "stimulus file");

    std::string validate_path;
    auto *v = app.add_subcommand("validate", "check a network file");
    v->add_option("--net", validate_path, "network file")->required();

    RunArgs run;
    auto *r = app.add_subcommand("run", "simulate");
    r->add_option("--net", run.net, "network file")->required();
    r->add_option("--stim", run.stim, "stimulus file");
    r->add_option("--steps", run.steps, "1 ms steps to run");
    r->add_option("--seed", run.seed, "simulation seed");
    r->add_option("--tm-minicolumns", run.tm, "time-multiplexed minicolumns (multiple of 1024)");
    r->add_option("--f-gate", run.f_gate, "axon read gate, 0..1023; calibrated if absent")->check(CLI::Range(0, 1023));
    r->add_option("--monitor", run.monitor, "hex address range FIRST:LAST to record, repeatable");
    r->add_option("--spikes", run.spikes, "spike bitmap records");
    r->add_option("--events", run.events, "per-type event records");
    r->add_option("--stats", run.stats, "per-step active-minicolumn records");
    r->add_option("--workers", run.workers, "parallel compute threads")->check(CLI::PositiveNumber);
    r->add_option("--axon-burst", run.burst, "events read per axon opportunity")->check(CLI::PositiveNumber);
    r->add_option("--tx-budget", run.tx_budget, "staged events split per axon opportunity")->check(CLI::PositiveNumber);
    r->add_option("--tx-burst", run.tx_burst, "placements written per axon opportunity")->check(CLI::PositiveNumber);
    r->add_option("--opportunities", run.opps, "axon opportunities per segment")->check(CLI::PositiveNumber);

    ReportArgs rep;
    auto *p = app.add_subcommand("report", "reduce auditory-run records to figure data");
    p->add_option("--events", rep.events, "event records")->required();
    p->add_option("--stats", rep.stats, "stats records");
    p->add_option("--channels", rep.channels, "cochlear channels");
    p->add_option("--hypercolumns", rep.hypercolumns, "hypercolumns per channel");
    p->add_option("--bin-ms", rep.bin_ms, "time bin")->check(CLI::PositiveNumber);
    p->add_option("--duration", rep.duration, "ms covered; inferred if absent");
    p->add_option("--out", rep.out, "output prefix");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*g)
        {
            return cmd_gen(gen);
        }
        if (*v)
        {
            return cmd_validate(validate_path);
        }
        if (*r)
        {
            return cmd_run(run);
        }
        if (*p)
        {
            return cmd_report(rep);
        }
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
