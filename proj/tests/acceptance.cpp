// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "cortex/engine.hpp"
#include "cortex/netio.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cortex;

namespace
{

struct Outcome
{
    bool pass{false};
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char *f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome dither_exactness()
{
    const auto t0 = Clock::now();
    double worst = 0;
    bool exact = true;
    for (int leak : {192, 218, 233, 248})
    {
        for (int x = -8; x <= 7; ++x)
        {
            int sum = 0;
            for (std::uint32_t r = 0; r < 32; ++r)
            {
                sum += decay_stochastic(Code4(x), Leak8{static_cast<std::uint8_t>(leak)}, r).code;
            }
            const double mean = sum / 32.0;
            exact = exact && mean == oracle::dither_mean(x, leak);
            worst = std::max(worst, std::abs(mean - x * leak / 256.0));
        }
    }
    const double s = seconds_since(t0);
    return {exact && worst <= 1.0 / 32 && s < 1.0,
            fmt("max |E - xL/256| = %.5f codes (bound 0.03125), %.3f s", worst, s)};
}

Outcome exponential_fit()
{
    const auto t0 = Clock::now();
    MinicolumnParams mp;
    mp.layout = MinicolumnLayout::from_counts({100, 0, 0, 0, 0, 0, 0, 0});
    mp.types.fill(fixture::table_type());
    constexpr int kColumns = 100; // 10^4 neurons
    std::vector<MinicolumnState> states(kColumns);
    for (auto &s : states)
    {
        s.fill(NeuronState{Code4(7), Code4(0)}.pack());
    }
    double worst = 0;
    for (int t = 1; t <= 10; ++t)
    {
        long long sum = 0;
        for (int c = 0; c < kColumns; ++c)
        {
            RngStream rng = RngStream::derive(2024, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(t));
            auto &s = states[static_cast<std::size_t>(c)];
            minicolumn_step(s, s, mp, TypeWeights{}, rng);
            for (auto b : s)
            {
                sum += NeuronState::unpack(b).psc.code;
            }
        }
        const double mean = static_cast<double>(sum) / (kColumns * 100) / 8.0;
        const double expected = 0.875 * std::exp(-t / 5.8);
        worst = std::max(worst, std::abs(mean - expected) / expected);
    }
    const double s = seconds_since(t0);
    return {worst <= 0.10 && s < 10.0, fmt("max relative error %.2f%% over t=1..10 (bound 10%%), %.3f s", worst * 100, s)};
}

Outcome delay_thresholds_check()
{
    const auto t0 = Clock::now();
    const auto th = delay_thresholds();
    const auto ref = oracle::delay_ranges();
    long long sum = 0;
    bool ratios = true;
    bool match = true;
    for (int i = 0; i < kDelayClasses; ++i)
    {
        sum += th.R[i];
        ratios = ratios && std::abs(static_cast<double>(th.R[0]) / th.R[i] - (i + 1)) <= 0.05 * (i + 1);
        match = match && th.R[i] == ref[i];
    }
    const double s = seconds_since(t0);
    const bool pass = std::llabs(sum - (1ll << 20)) <= 16 && ratios && match && s < 1.0;
    return {pass, fmt("sum R = %lld (2^20 %+lld), R_1 = %u, ratios %s, independent H_16 %s", sum, sum - (1ll << 20),
                          th.R[0], ratios ? "ok" : "off", match ? "matches" : "differs")};
}

Outcome delay_ratios()
{
    const auto t0 = Clock::now();
    std::vector<ConnectionSet> sets(kDelayClasses);
    for (int i = 0; i < kDelayClasses; ++i)
    {
        fixture::enable(sets[i], 0, i + 1, fixture::dense_rule(0, 1, 1, 1));
    }
    const auto lut = fixture::per_hyper(sets);
    AxonConfig cfg;
    cfg.gate_f = 960;
    cfg.rx_burst = 1u << 20;
    AxonArray axon(cfg, *lut, RngStream(99));
    std::vector<DelayedEvent> out;
    constexpr int kPerClass = 100000;
    for (int i = 0; i < kPerClass * kDelayClasses; ++i)
    {
        Event ev;
        ev.source = MiniAddr(static_cast<std::uint32_t>(i % kDelayClasses), 0);
        ev.counts[0] = Count4(1);
        axon.stage_internal(ev);
        out.clear();
        axon.opportunity(out);
    }
    while (!axon.idle())
    {
        out.clear();
        axon.opportunity(out);
    }
    const double r1 = axon.mean_residence(1);
    double worst = 0;
    bool all = true;
    for (int c = 1; c <= kDelayClasses; ++c)
    {
        all = all && axon.counters().delivered_by_class[c - 1] == kPerClass;
        worst = std::max(worst, std::abs(axon.mean_residence(c) / r1 - c) / c);
    }

    double worst_sigma = 0;
    for (int f : {0, 512, 1023})
    {
        const DelayGenerator gen(f);
        RngStream rng(1000 + static_cast<std::uint64_t>(f));
        constexpr int kN = 1000000;
        int open = 0;
        for (int i = 0; i < kN; ++i)
        {
            open += gen.gate_open(rng.draw10());
        }
        const double p = (1024.0 - f) / 1024.0;
        const double sigma = std::sqrt(kN * p * (1 - p));
        const double dev = std::abs(open - kN * p);
        worst_sigma = std::max(worst_sigma, sigma > 0 ? dev / sigma : (dev == 0 ? 0.0 : 1e9));
    }
    const double s = seconds_since(t0);
    return {all && worst <= 0.15 && worst_sigma <= 3.0 && s < 60.0,
            fmt("max |ratio - i| / i = %.2f%% (bound 15%%), gate deviation %.2f sigma (bound 3), %.1f s", worst * 100,
                    worst_sigma, s)};
}

std::array<int, 8> codes(const TypeWeights &w)
{
    std::array<int, 8> out{};
    for (int k = 0; k < 8; ++k)
    {
        out[k] = w[k].code;
    }
    return out;
}

Outcome arbiter_oracle()
{
    const auto t0 = Clock::now();
    RngStream rng(31337);
    std::vector<PreSynapticContribution> cs(1000000);
    for (auto &c : cs)
    {
        const auto arb = static_cast<std::uint32_t>(rng.below(16));
        const auto key = static_cast<std::uint32_t>(rng.below(7000)) * 131u;
        c.dest = MiniAddr((arb << 23) | ((key & 0xFFFFFu) << 3) | static_cast<std::uint32_t>(rng.below(8)));
        for (auto &w : c.w)
        {
            w = Code4(static_cast<int>(rng.below(16)) - 8);
        }
    }
    oracle::MapAccumulator ref;
    for (const auto &c : cs)
    {
        ref.add(c.dest.raw, codes(c.w));
    }
    const auto expected = ref.flushed();

    auto run = [](const std::vector<PreSynapticContribution> &in) {
        ArbiterBank bank;
        std::set<std::uint32_t> slots;
        for (const auto &c : in)
        {
            slots.insert(bank.accumulate(c).slot);
        }
        std::multiset<std::pair<std::uint32_t, std::array<int, 8>>> out;
        for (auto s : slots)
        {
            const auto f = bank.flush(s);
            out.insert({f.addr.raw, codes(f.w)});
        }
        return out;
    };
    const bool same = run(cs) == expected;
    for (std::size_t i = cs.size() - 1; i > 0; --i)
    {
        std::swap(cs[i], cs[rng.below(static_cast<std::uint32_t>(i + 1))]);
    }
    const bool permuted = run(cs) == expected;
    const double s = seconds_since(t0);
    return {same && permuted && s < 60.0,
            fmt("%zu destinations, oracle %s, permuted %s, %.1f s", expected.size(), same ? "equal" : "DIFFERENT",
                    permuted ? "equal" : "DIFFERENT", s)};
}

Outcome capacity()
{
    ArbiterBank bank;
    for (std::uint32_t key = 0; key < 8192; ++key)
    {
        bank.accumulate({MiniAddr((7u << 23) | (key << 3)), TypeWeights{}});
    }
    bool full = false;
    try
    {
        bank.accumulate({MiniAddr((7u << 23) | (8192u << 3)), TypeWeights{}});
    }
    catch (const ArbiterFull &e)
    {
        full = e.arbiter() == 7;
    }
    const std::uint32_t base = 7u * 8192 * 8;
    for (std::uint32_t s = base; s < base + 8192 * 8; ++s)
    {
        if (bank.bound(s))
        {
            bank.release(s);
        }
    }
    bool refill = true;
    try
    {
        for (std::uint32_t key = 20000; key < 20000 + 8192; ++key)
        {
            bank.accumulate({MiniAddr((7u << 23) | (key << 3) | 5u), TypeWeights{}});
        }
    }
    catch (const ArbiterFull &)
    {
        refill = false;
    }
    return {full && refill && bank.bound_groups(7) == 8192,
            fmt("8193rd key %s, release-and-refill %s", full ? "raised ArbiterFull" : "ACCEPTED",
                    refill ? "succeeded" : "FAILED")};
}

std::string read_or_empty(const std::string &path)
{
    try
    {
        return netio::read_file(path);
    }
    catch (const std::exception &)
    {
        return {};
    }
}

int shell(const std::string &cmd)
{
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

struct Scratch
{
    std::filesystem::path dir;
    Scratch()
    {
        dir = std::filesystem::temp_directory_path() / ("cortexsim_accept_" + std::to_string(::getpid()));
        std::filesystem::create_directories(dir);
    }
    ~Scratch() { std::filesystem::remove_all(dir); }
    [[nodiscard]] std::string file(const std::string &n) const { return (dir / n).string(); }
};

Outcome determinism(const Scratch &tmp)
{
    const std::string exe = CORTEXSIM_EXE;
    const auto net = tmp.file("det_net.txt");
    const auto stim = tmp.file("det_stim.txt");
    if (shell(exe + " gen-auditory --channels 10 --hypercolumns 10 --seed 4 --out " + net + " --stim " + stim +
                " >/dev/null") != 0)
    {
        return {false, "gen-auditory failed"};
    }
    const unsigned n = std::max(4u, std::thread::hardware_concurrency());
    auto run = [&](unsigned workers) {
        const auto tag = std::to_string(workers);
        return shell(exe + " run --net " + net + " --stim " + stim + " --steps 150 --seed 11 --axon-burst 1048576" +
                       " --workers " + tag + " --spikes " + tmp.file("sp" + tag) + " --events " +
                       tmp.file("ev" + tag) + " --stats " + tmp.file("st" + tag) + " >" + tmp.file("out" + tag)) == 0;
    };
    if (!run(1) || !run(n))
    {
        return {false, "run failed"};
    }
    bool same = true;
    std::size_t bytes = 0;
    for (const char *kind : {"sp", "ev", "st"})
    {
        const auto a = read_or_empty(tmp.file(kind + std::to_string(1)));
        const auto b = read_or_empty(tmp.file(kind + std::to_string(n)));
        same = same && a == b && !a.empty();
        bytes += a.size();
    }
    return {same, fmt("workers 1 vs %u over 150 steps: %zu bytes of spike/event/stats records %s", n, bytes,
                          same ? "identical" : "DIFFER")};
}

Outcome hardware_model()
{
    const double real_time = hw_time_model(176 * 1024, 200, 5.0);
    const double full = hw_time_model(std::size_t{1} << 20, 200, 5.0);
    const bool pass = real_time == 1077120.0 && std::abs(full - 6.27e6) <= 0.01e6;
    return {pass, fmt("176k: %.0f ns per step, 2^20: %.3f ms per step (%.2fx slower than real time)", real_time,
                          full * 1e-6, full * 1e-6)};
}

/// Aggregates what the desk criteria need without writing record files.
class DeskSink : public RecordSink
{
public:
    DeskSink(const netio::AuditoryLayout &layout, std::size_t steps)
        : layout_(layout), events_(static_cast<std::size_t>(layout.channels), std::vector<std::uint32_t>(steps, 0))
    {
    }

    void on_spikes(std::uint32_t, MiniAddr, const SpikeBitmap &) override {}
    void on_event(std::uint32_t t, MiniAddr addr, const TypeCounts &) override
    {
        const int c = layout_.channel_of(addr);
        if (c >= 0 && t < events_[0].size())
        {
            ++events_[static_cast<std::size_t>(c)][t];
        }
    }
    void on_stats(const StepStats &s) override { active_.push_back(static_cast<double>(s.active_tm_minicolumns)); }

    [[nodiscard]] const std::vector<std::uint32_t> &events(int c) const { return events_[static_cast<std::size_t>(c)]; }
    [[nodiscard]] const std::vector<double> &active() const { return active_; }

private:
    netio::AuditoryLayout layout_;
    std::vector<std::vector<std::uint32_t>> events_;
    std::vector<double> active_;
};

struct DeskResult
{
    bool silent_before_window{true};
    int shortest_persistence{1 << 30};
    double mean_active{0};
    double updates_per_s{0};
    bool aborted{false};
};

DeskResult desk_run(std::uint64_t seed, std::size_t steps)
{
    netio::AuditoryOptions o;
    o.seed = seed;
    const auto gen = netio::gen_auditory(o);
    const auto lut = netio::build_lut(gen.network);
    const netio::AuditoryLayout layout{o.channels, o.hypercolumns};

    EngineConfig cfg;
    cfg.seed = seed;
    cfg.workers = std::max(1u, std::thread::hardware_concurrency());
    cfg.axon.rx_burst = std::size_t{1} << 20;
    cfg.axon.gate_f = calibrated_gate(cfg.opportunities_per_step());
    Engine engine(cfg, lut);
    engine.inject(gen.stimulus);
    DeskSink sink(layout, steps);
    DeskResult r;
    const auto t0 = Clock::now();
    try
    {
        engine.run(steps, &sink);
    }
    catch (const ArbiterFull &e)
    {
        std::fprintf(stderr, "seed %llu: %s\n%s\n", static_cast<unsigned long long>(seed), e.what(),
                engine.diagnostics().c_str());
        r.aborted = true;
        return r;
    }
    r.updates_per_s = static_cast<double>(engine.neuron_updates()) / seconds_since(t0);

    for (int c = 0; c < o.channels; ++c)
    {
        const auto &ev = sink.events(c);
        const std::uint32_t first = netio::window_start(o, 0, c);
        for (std::uint32_t t = 0; t < first; ++t)
        {
            r.silent_before_window = r.silent_before_window && ev[t] == 0;
        }
        // longest run of consecutive active ms that starts in one of the channel's windows
        int best = 0;
        for (int rep = 0; rep < o.repeats; ++rep)
        {
            const std::uint32_t w = netio::window_start(o, rep, c);
            for (std::uint32_t start = w; start < w + static_cast<std::uint32_t>(o.sweep_ms) && start < steps; ++start)
            {
                if (ev[start] == 0 || (start > w && ev[start - 1] != 0))
                {
                    continue;
                }
                std::uint32_t end = start;
                while (end < steps && ev[end] != 0)
                {
                    ++end;
                }
                best = std::max(best, static_cast<int>(end - start));
            }
        }
        r.shortest_persistence = std::min(r.shortest_persistence, best);
    }
    double sum = 0;
    for (double a : sink.active())
    {
        sum += a;
    }
    r.mean_active = sink.active().empty() ? 0 : sum / static_cast<double>(sink.active().size());
    return r;
}

struct DeskOutcomes
{
    Outcome silence;
    Outcome persistence;
    Outcome stability;
    Outcome throughput;
};

DeskOutcomes desk_experiment()
{
    constexpr int kSeeds = 10;
    constexpr std::size_t kSteps = 1000;
    const auto t0 = Clock::now();
    std::vector<DeskResult> runs;
    for (int s = 1; s <= kSeeds; ++s)
    {
        runs.push_back(desk_run(static_cast<std::uint64_t>(s), kSteps));
        std::fprintf(stderr, "desk seed %d: mean active %.1f, shortest persistence %d ms, %.3g updates/s\n", s,
                runs.back().mean_active, runs.back().shortest_persistence, runs.back().updates_per_s);
    }
    const double total = seconds_since(t0);

    bool aborted = false;
    bool silent = true;
    int persistence = 1 << 30;
    double mean = 0;
    double ups = 0;
    for (const auto &r : runs)
    {
        aborted = aborted || r.aborted;
        silent = silent && r.silent_before_window;
        persistence = std::min(persistence, r.shortest_persistence);
        mean += r.mean_active;
        ups += r.updates_per_s;
    }
    mean /= kSeeds;
    ups /= kSeeds;
    double var = 0;
    for (const auto &r : runs)
    {
        var += (r.mean_active - mean) * (r.mean_active - mean);
    }
    const double cv = mean > 0 ? std::sqrt(var / (kSeeds - 1)) / mean : INFINITY;

    DeskOutcomes out;
    out.silence = {!aborted && silent, fmt("%d seeds x %zu steps, C=10 H=10: no channel fires before its first window",
                                               kSeeds, kSteps)};
    if (!silent)
    {
        out.silence.detail = "a channel fired before its first window";
    }
    out.persistence = {!aborted && persistence >= 100,
            fmt("shortest per-channel run of consecutive active ms after a window: %d ms (bound 100)", persistence)};
    out.stability = {!aborted && cv < 0.25,
            fmt("per-run mean active TM minicolumns %.1f, CV across %d seeds %.2f%% (bound 25%%), %.0f s total", mean,
                    kSeeds, cv * 100, total)};
    out.throughput = {ups > 0, fmt("%.3g neuron updates per second (desk runs, %u threads; not asserted)", ups,
                                       std::max(1u, std::thread::hardware_concurrency()))};
    return out;
}

/// `run` must print its own rate; the number itself is not asserted.
Outcome throughput(const Scratch &tmp, const Outcome &desk)
{
    const auto out = read_or_empty(tmp.file("out1"));
    const auto at = out.find("neuron updates");
    if (at == std::string::npos)
    {
        return {false, "run printed no neuron-update rate"};
    }
    const auto line = out.substr(at, out.find('\n', at) - at);
    return {desk.pass, "run printed \"" + line + "\"; " + desk.detail};
}

Outcome fanout_bound()
{
    // one source at hypercolumn 0; slot s reaches hypercolumn s + 1 with all 128 minicolumns
    ConnectionSet cs;
    for (int s = 0; s < kConnectionSlots; ++s)
    {
        fixture::enable(cs, s, s + 1, fixture::dense_rule(static_cast<std::uint32_t>(s + 1), 128, 128, 1));
    }
    ConnectionSet silent;
    const auto lut = fixture::per_hyper({cs, silent});

    std::set<std::uint32_t> brute;
    for (int s = 0; s < kConnectionSlots; ++s)
    {
        for (std::uint32_t m = 0; m < 128; ++m)
        {
            brute.insert(MiniAddr(static_cast<std::uint32_t>(s + 1), m).raw);
        }
    }
    std::set<std::uint32_t> mapped;
    for (int s = 0; s < kConnectionSlots; ++s)
    {
        DelayedEvent ev;
        ev.source = MiniAddr(0, 0);
        ev.slot = static_cast<std::uint8_t>(s);
        for (const auto a : map_destinations(ev, lut->pre_connection(ev.source, s), lut->network_seed()))
        {
            mapped.insert(a.raw);
        }
    }

    // the same event through the engine
    EngineConfig cfg;
    cfg.axon.gate_f = calibrated_gate(cfg.opportunities_per_step());
    cfg.axon.rx_burst = std::size_t{1} << 20;
    Engine engine(cfg, lut);
    std::set<std::uint32_t> reached;
    engine.set_flush_observer([&](std::uint32_t, MiniAddr a, const TypeWeights &w) {
        if (std::any_of(w.begin(), w.end(), [](Code4 c) { return c.code != 0; }))
        {
            reached.insert(a.raw);
        }
    });
    Event ev;
    ev.source = MiniAddr(0, 0);
    ev.counts[0] = Count4(1);
    const std::vector<StimulusEvent> stim{{0, ev}};
    engine.inject(stim);
    for (int t = 0; t < 200 && (t < 2 || !engine.axon().idle()); ++t)
    {
        engine.run_step();
    }
    engine.run_step(); // flush anything delivered late in the last step

    const bool pass = brute.size() == 2048 && mapped == brute && reached == brute;
    return {pass, fmt("brute force %zu, mapped %zu, reached through the engine %zu distinct minicolumns", brute.size(),
                          mapped.size(), reached.size())};
}

} // namespace

int main()
{
    Scratch tmp;
    int failures = 0;
    auto report = [&](const char *name, const Outcome &o) {
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    };

    report("dither exactness", dither_exactness());
    report("exponential decay fit", exponential_fit());
    report("delay thresholds", delay_thresholds_check());
    report("delay ratios and gate frequency", delay_ratios());
    report("arbiter oracle", arbiter_oracle());
    report("capacity semantics", capacity());
    report("determinism", determinism(tmp));
    report("hardware time model", hardware_model());
    const auto desk = desk_experiment();
    report("desk auditory (a) silence before first window", desk.silence);
    report("desk auditory (b) persistence", desk.persistence);
    report("desk auditory (c) stability", desk.stability);
    report("fan-out bound", fanout_bound());
    report("throughput report", throughput(tmp, desk.throughput));
    return failures == 0 ? 0 : 1;
}
