#include "cortex/netio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace cortex::netio
{

FormatError::FormatError(std::string source, int line, const std::string &message)
    : std::runtime_error(line > 0 ? source + ":" + std::to_string(line) + ": " + message : source + ": " + message),
      line_(line)
{
}

std::string read_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw std::runtime_error("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace
{

std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size())
    {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r'))
        {
            ++i;
        }
        const std::size_t b = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r')
        {
            ++i;
        }
        if (i > b)
        {
            out.push_back(s.substr(b, i - b));
        }
    }
    return out;
}

/// Calls fn(line_number, tokens) for each non-blank line, comments stripped.
template <typename Fn>
void for_each_line(std::string_view text, Fn &&fn)
{
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size())
    {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
        {
            end = text.size();
        }
        std::string_view line = text.substr(pos, end - pos);
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos)
        {
            line = line.substr(0, hash);
        }
        auto tok = split_ws(line);
        if (!tok.empty())
        {
            fn(line_no, tok);
        }
        if (end == text.size())
        {
            break;
        }
        pos = end + 1;
    }
}

class Fields
{
public:
    Fields(const std::string &source, int line, const std::vector<std::string_view> &tok)
        : source_(source), line_(line), tok_(tok)
    {
    }

    void expect(std::size_t n) const
    {
        if (tok_.size() != n)
        {
            fail("'" + std::string(tok_[0]) + "' expects " + std::to_string(n - 1) + " fields, got " +
                    std::to_string(tok_.size() - 1));
        }
    }

    [[noreturn]] void fail(const std::string &msg) const { throw FormatError(source_, line_, msg); }

    long long integer(std::size_t i, long long lo, long long hi, const char *what) const
    {
        long long v = 0;
        const auto s = tok_[i];
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
        {
            fail(std::string(what) + ": '" + std::string(s) + "' is not an integer");
        }
        if (v < lo || v > hi)
        {
            fail(std::string(what) + " " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "]");
        }
        return v;
    }

    std::uint64_t unsigned64(std::size_t i, const char *what) const
    {
        std::uint64_t v = 0;
        const auto s = tok_[i];
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
        {
            fail(std::string(what) + ": '" + std::string(s) + "' is not an unsigned integer");
        }
        return v;
    }

    std::uint32_t hex(std::size_t i, std::uint32_t max, const char *what) const
    {
        std::uint64_t v = 0;
        const auto s = tok_[i];
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
        if (ec != std::errc{} || p != s.data() + s.size())
        {
            fail(std::string(what) + ": '" + std::string(s) + "' is not hexadecimal");
        }
        if (v > max)
        {
            fail(std::string(what) + " " + std::string(s) + " exceeds its field width");
        }
        return static_cast<std::uint32_t>(v);
    }

    double real(std::size_t i, const char *what) const
    {
        double v = 0;
        const auto s = tok_[i];
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v))
        {
            fail(std::string(what) + ": '" + std::string(s) + "' is not a number");
        }
        return v;
    }

    double tau(std::size_t i, const char *what) const
    {
        const double t = real(i, what);
        if (!(t > 0.0) || t > 30.0)
        {
            fail(std::string(what) + " " + std::string(tok_[i]) + " ms outside (0, 30]");
        }
        return t;
    }

    double gain(std::size_t i, const char *what) const
    {
        const double g = real(i, what);
        try
        {
            (void)Gain8::from_real(g);
        }
        catch (const std::out_of_range &e)
        {
            fail(std::string(what) + ": " + e.what());
        }
        return g;
    }

private:
    const std::string &source_;
    int line_;
    const std::vector<std::string_view> &tok_;
};

constexpr long long kU32Max = 0xFFFFFFFFll;

std::string fmt_double(double v)
{
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

std::string fmt_hex(std::uint64_t v, int width)
{
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v, 16);
    std::string s(buf, p);
    if (static_cast<int>(s.size()) < width)
    {
        s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
    }
    return s;
}

using SlotKey = std::pair<std::uint32_t, int>;

} // namespace

NetworkDescription parse_network(std::string_view text, const std::string &source)
{
    NetworkDescription net;
    bool seen_seed = false;
    std::set<SlotKey> type_keys, post_keys, pre_keys, weight_keys, mask_keys;
    std::set<std::uint32_t> conn_keys;

    for_each_line(text, [&](int line, const std::vector<std::string_view> &tok) {
        const Fields f(source, line, tok);
        const std::string_view kw = tok[0];
        if (kw == "seed")
        {
            f.expect(2);
            if (seen_seed)
            {
                f.fail("duplicate seed");
            }
            seen_seed = true;
            net.seed = f.unsigned64(1, "seed");
        }
        else if (kw == "range")
        {
            f.expect(5);
            if (net.ranges.size() >= RangeCam::kCapacity)
            {
                f.fail("more than " + std::to_string(RangeCam::kCapacity) + " address ranges");
            }
            const auto idx = f.integer(1, 0, kU32Max, "range index");
            if (static_cast<std::size_t>(idx) != net.ranges.size())
            {
                f.fail("range index " + std::to_string(idx) + " out of order, expected " +
                        std::to_string(net.ranges.size()));
            }
            RangeLine r;
            r.start = f.hex(2, MiniAddr::kAddrMask, "range start");
            r.param_type_id = static_cast<std::uint32_t>(f.integer(3, 0, kU32Max, "param type id"));
            r.conn_id = static_cast<std::uint32_t>(f.integer(4, 0, kU32Max, "connection id"));
            r.line = line;
            if (net.ranges.empty() && r.start != 0)
            {
                f.fail("first range must start at 0000000");
            }
            if (!net.ranges.empty() && r.start <= net.ranges.back().start)
            {
                f.fail("range starts must be strictly increasing");
            }
            net.ranges.push_back(r);
        }
        else if (kw == "type")
        {
            f.expect(12);
            TypeLine t;
            t.param_type_id = static_cast<std::uint32_t>(f.integer(1, 0, kU32Max, "param type id"));
            t.slot = static_cast<int>(f.integer(2, 0, kNeuronTypes - 1, "type slot"));
            t.count = static_cast<int>(f.integer(3, 0, kNeuronsPerMinicolumn, "neuron count"));
            if (t.count % 4 != 0)
            {
                f.fail("neuron count " + std::to_string(t.count) + " is not a multiple of 4");
            }
            t.tau_epsc = f.tau(4, "tau_epsc");
            t.tau_ipsc = f.tau(5, "tau_ipsc");
            t.tau_mem = f.tau(6, "tau_mem");
            t.tau_rfc = f.tau(7, "tau_rfc");
            t.g_syn = f.gain(8, "g_syn");
            t.g_psc = f.gain(9, "g_psc");
            t.v_init = static_cast<int>(f.integer(10, Code4::kMin, Code4::kMax, "v_init"));
            t.v_reset = static_cast<int>(f.integer(11, Code4::kMin, Code4::kMax, "v_reset"));
            if (t.v_reset > t.v_init)
            {
                f.fail("v_reset must not exceed v_init");
            }
            t.line = line;
            if (!type_keys.insert({t.param_type_id, t.slot}).second)
            {
                f.fail("duplicate type slot");
            }
            net.types.push_back(t);
        }
        else if (kw == "conn")
        {
            f.expect(2);
            ConnLine c;
            c.conn_id = static_cast<std::uint32_t>(f.integer(1, 0, kU32Max, "connection id"));
            c.line = line;
            if (!conn_keys.insert(c.conn_id).second)
            {
                f.fail("duplicate conn declaration");
            }
            net.conns.push_back(c);
        }
        else if (kw == "post")
        {
            f.expect(4);
            PostLine p;
            p.conn_id = static_cast<std::uint32_t>(f.integer(1, 0, kU32Max, "connection id"));
            p.slot = static_cast<int>(f.integer(2, 0, kConnectionSlots - 1, "connection slot"));
            p.delay_ms = static_cast<int>(f.integer(3, 1, kDelayClasses, "delay"));
            p.line = line;
            if (!post_keys.insert({p.conn_id, p.slot}).second)
            {
                f.fail("duplicate post slot");
            }
            net.posts.push_back(p);
        }
        else if (kw == "pre")
        {
            f.expect(6);
            PreLine p;
            p.conn_id = static_cast<std::uint32_t>(f.integer(1, 0, kU32Max, "connection id"));
            p.slot = static_cast<int>(f.integer(2, 0, kConnectionSlots - 1, "connection slot"));
            p.offset = f.hex(3, MiniAddr::kHyperMask, "hypercolumn offset");
            p.fanout = static_cast<int>(f.integer(4, 1, kMinicolumnsPerHyper, "fanout"));
            p.dest_hc_size = static_cast<int>(f.integer(5, 1, kMinicolumnsPerHyper, "destination size"));
            if (p.fanout > p.dest_hc_size)
            {
                f.fail("fanout " + std::to_string(p.fanout) + " exceeds destination size " +
                        std::to_string(p.dest_hc_size));
            }
            p.line = line;
            if (!pre_keys.insert({p.conn_id, p.slot}).second)
            {
                f.fail("duplicate pre slot");
            }
            net.pres.push_back(p);
        }
        else if (kw == "weights")
        {
            f.expect(3 + kNeuronTypes);
            WeightsLine w;
            w.conn_id = static_cast<std::uint32_t>(f.integer(1, 0, kU32Max, "connection id"));
            w.slot = static_cast<int>(f.integer(2, 0, kConnectionSlots - 1, "connection slot"));
            for (int k = 0; k < kNeuronTypes; ++k)
            {
                w.weights[k] = static_cast<int>(f.integer(3 + k, Code4::kMin, Code4::kMax, "weight"));
            }
            w.line = line;
            if (!weight_keys.insert({w.conn_id, w.slot}).second)
            {
                f.fail("duplicate weights slot");
            }
            net.weights.push_back(w);
        }
        else if (kw == "masks")
        {
            f.expect(3 + kNeuronTypes);
            MasksLine m;
            m.conn_id = static_cast<std::uint32_t>(f.integer(1, 0, kU32Max, "connection id"));
            m.slot = static_cast<int>(f.integer(2, 0, kConnectionSlots - 1, "connection slot"));
            for (int k = 0; k < kNeuronTypes; ++k)
            {
                m.masks[k] = static_cast<std::uint8_t>(f.hex(3 + k, 0xFF, "mask"));
            }
            m.line = line;
            if (!mask_keys.insert({m.conn_id, m.slot}).second)
            {
                f.fail("duplicate masks slot");
            }
            net.masks.push_back(m);
        }
        else
        {
            f.fail("unknown record '" + std::string(kw) + "'");
        }
    });
    return net;
}

NetworkDescription read_network_file(const std::string &path)
{
    return parse_network(read_file(path), path);
}

std::string serialize_network(const NetworkDescription &net)
{
    std::ostringstream o;
    o << "seed " << net.seed << '\n';
    for (std::size_t i = 0; i < net.ranges.size(); ++i)
    {
        const auto &r = net.ranges[i];
        o << "range " << i << ' ' << fmt_hex(r.start, 7) << ' ' << r.param_type_id << ' ' << r.conn_id << '\n';
    }
    for (const auto &t : net.types)
    {
        o << "type " << t.param_type_id << ' ' << t.slot << ' ' << t.count << ' ' << fmt_double(t.tau_epsc) << ' '
          << fmt_double(t.tau_ipsc) << ' ' << fmt_double(t.tau_mem) << ' ' << fmt_double(t.tau_rfc) << ' '
          << fmt_double(t.g_syn) << ' ' << fmt_double(t.g_psc) << ' ' << t.v_init << ' ' << t.v_reset << '\n';
    }
    for (const auto &c : net.conns)
    {
        o << "conn " << c.conn_id << '\n';
    }
    for (const auto &p : net.posts)
    {
        o << "post " << p.conn_id << ' ' << p.slot << ' ' << p.delay_ms << '\n';
    }
    for (const auto &p : net.pres)
    {
        o << "pre " << p.conn_id << ' ' << p.slot << ' ' << fmt_hex(p.offset, 5) << ' ' << p.fanout << ' '
          << p.dest_hc_size << '\n';
    }
    for (const auto &w : net.weights)
    {
        o << "weights " << w.conn_id << ' ' << w.slot;
        for (int v : w.weights)
        {
            o << ' ' << v;
        }
        o << '\n';
    }
    for (const auto &m : net.masks)
    {
        o << "masks " << m.conn_id << ' ' << m.slot;
        for (auto v : m.masks)
        {
            o << ' ' << fmt_hex(v, 2);
        }
        o << '\n';
    }
    return o.str();
}

std::shared_ptr<const ParamLut> build_lut(const NetworkDescription &net, const std::string &source)
{
    if (net.ranges.empty())
    {
        throw FormatError(source, 0, "no address ranges");
    }

    // Parameter types, densely indexed in id order.
    std::map<std::uint32_t, std::vector<const TypeLine *>> by_type;
    for (const auto &t : net.types)
    {
        by_type[t.param_type_id].push_back(&t);
    }
    std::map<std::uint32_t, std::size_t> param_index;
    std::vector<MinicolumnParams> params;
    for (const auto &[id, lines] : by_type)
    {
        std::array<int, kNeuronTypes> counts{};
        MinicolumnParams p;
        for (const TypeLine *t : lines)
        {
            counts[t->slot] = t->count;
            NeuronTypeParams &np = p.types[t->slot];
            np.leak_epsc = leak_code(t->tau_epsc);
            np.leak_ipsc = leak_code(t->tau_ipsc);
            np.leak_mem = leak_code(t->tau_mem);
            np.leak_rfc = leak_code(t->tau_rfc);
            np.g_syn = Gain8::from_real(t->g_syn);
            np.g_psc = Gain8::from_real(t->g_psc);
            np.v_init = Code4(t->v_init);
            np.v_reset = Code4(t->v_reset);
        }
        int total = 0;
        for (int c : counts)
        {
            total += c;
        }
        if (total != kNeuronsPerMinicolumn)
        {
            throw FormatError(source, lines.front()->line,
                    "param type " + std::to_string(id) + " has " + std::to_string(total) + " neurons, expected 100");
        }
        p.layout = MinicolumnLayout::from_counts(counts);
        param_index[id] = params.size();
        params.push_back(p);
    }

    // Connection sets.
    std::map<std::uint32_t, ConnectionSet> sets;
    for (const auto &c : net.conns)
    {
        sets[c.conn_id];
    }
    std::map<SlotKey, int> post_line;
    for (const auto &p : net.posts)
    {
        auto &slot = sets[p.conn_id].post.slots[p.slot];
        slot.enabled = true;
        slot.delay_class = static_cast<std::uint8_t>(p.delay_ms);
        post_line[{p.conn_id, p.slot}] = p.line;
    }
    std::set<SlotKey> have_pre, have_w, have_m;
    auto require_enabled = [&](std::uint32_t conn, int slot, int line, const char *what) -> ConnectionRule & {
        if (!post_line.contains({conn, slot}))
        {
            throw FormatError(source, line,
                    std::string(what) + " for connection " + std::to_string(conn) + " slot " + std::to_string(slot) +
                            " which is not enabled by a post record");
        }
        return sets[conn].rules[slot];
    };
    for (const auto &p : net.pres)
    {
        ConnectionRule &r = require_enabled(p.conn_id, p.slot, p.line, "pre record");
        r.offset = p.offset;
        r.fanout_size = p.fanout;
        r.dest_hc_size = p.dest_hc_size;
        have_pre.insert({p.conn_id, p.slot});
    }
    for (const auto &w : net.weights)
    {
        ConnectionRule &r = require_enabled(w.conn_id, w.slot, w.line, "weights record");
        for (int k = 0; k < kNeuronTypes; ++k)
        {
            r.weights[k] = Code4(w.weights[k]);
        }
        have_w.insert({w.conn_id, w.slot});
    }
    for (const auto &m : net.masks)
    {
        ConnectionRule &r = require_enabled(m.conn_id, m.slot, m.line, "masks record");
        r.masks = m.masks;
        have_m.insert({m.conn_id, m.slot});
    }
    for (const auto &[key, line] : post_line)
    {
        const char *missing = !have_pre.contains(key) ? "pre" : !have_w.contains(key) ? "weights"
                : !have_m.contains(key)                                             ? "masks"
                                                                                    : nullptr;
        if (missing)
        {
            throw FormatError(source, line,
                    "enabled slot " + std::to_string(key.second) + " of connection " + std::to_string(key.first) +
                            " has no " + missing + " record");
        }
    }
    std::map<std::uint32_t, std::size_t> conn_index;
    std::vector<ConnectionSet> connections;
    for (auto &[id, set] : sets)
    {
        conn_index[id] = connections.size();
        connections.push_back(set);
    }

    std::vector<std::uint32_t> thresholds;
    std::vector<RangeEntry> ranges;
    for (const auto &r : net.ranges)
    {
        auto pi = param_index.find(r.param_type_id);
        if (pi == param_index.end())
        {
            throw FormatError(source, r.line, "undefined param type " + std::to_string(r.param_type_id));
        }
        auto ci = conn_index.find(r.conn_id);
        if (ci == conn_index.end())
        {
            throw FormatError(source, r.line, "undefined connection " + std::to_string(r.conn_id));
        }
        thresholds.push_back(r.start);
        ranges.push_back(RangeEntry{pi->second, ci->second});
    }

    try
    {
        return std::make_shared<const ParamLut>(RangeCam(std::move(thresholds)), std::move(ranges), std::move(params),
                std::move(connections), net.seed);
    }
    catch (const std::exception &e)
    {
        throw FormatError(source, 0, e.what());
    }
}

std::vector<StimulusEvent> parse_stimulus(std::string_view text, const std::string &source)
{
    std::vector<StimulusEvent> out;
    for_each_line(text, [&](int line, const std::vector<std::string_view> &tok) {
        const Fields f(source, line, tok);
        if (tok[0] != "ev")
        {
            f.fail("unknown record '" + std::string(tok[0]) + "'");
        }
        f.expect(3 + kNeuronTypes);
        StimulusEvent ev;
        ev.time_ms = static_cast<std::uint32_t>(f.integer(1, 0, kU32Max, "time"));
        ev.event.source = MiniAddr(f.hex(2, MiniAddr::kAddrMask, "address"));
        for (int k = 0; k < kNeuronTypes; ++k)
        {
            ev.event.counts[k] = Count4(static_cast<int>(f.integer(3 + k, 0, Count4::kMax, "count")));
        }
        if (!out.empty() && ev.time_ms < out.back().time_ms)
        {
            f.fail("stimulus events must be sorted by time");
        }
        out.push_back(ev);
    });
    return out;
}

std::vector<StimulusEvent> read_stimulus_file(const std::string &path)
{
    return parse_stimulus(read_file(path), path);
}

std::string serialize_stimulus(const std::vector<StimulusEvent> &events)
{
    std::string s;
    s.reserve(events.size() * 32);
    for (const auto &ev : events)
    {
        s += "ev ";
        s += std::to_string(ev.time_ms);
        s += ' ';
        s += hex_addr(ev.event.source);
        for (const auto &c : ev.event.counts)
        {
            s += ' ';
            s += std::to_string(c.count);
        }
        s += '\n';
    }
    return s;
}

std::string hex_addr(MiniAddr a)
{
    return fmt_hex(a.raw, 7);
}

std::string hex_bitmap(const SpikeBitmap &b)
{
    // 100 bits: 9 digits from the high word (36 bits), 16 from the low word
    return fmt_hex(b.words[1] & 0xFFFFFFFFFull, 9) + fmt_hex(b.words[0], 16);
}

CsvRecordSink::CsvRecordSink(std::ostream *spikes, std::ostream *events, std::ostream *stats)
    : spikes_(spikes), events_(events), stats_(stats)
{
}

void CsvRecordSink::on_spikes(std::uint32_t time_ms, MiniAddr addr, const SpikeBitmap &spikes)
{
    if (spikes_)
    {
        *spikes_ << time_ms << ',' << hex_addr(addr) << ',' << hex_bitmap(spikes) << '\n';
    }
}

void CsvRecordSink::on_event(std::uint32_t time_ms, MiniAddr addr, const TypeCounts &counts)
{
    if (!events_)
    {
        return;
    }
    for (int k = 0; k < kNeuronTypes; ++k)
    {
        if (counts[k].count != 0)
        {
            *events_ << time_ms << ',' << hex_addr(addr) << ',' << k << ',' << int{counts[k].count} << '\n';
        }
    }
}

void CsvRecordSink::on_stats(const StepStats &stats)
{
    if (stats_)
    {
        *stats_ << stats.time_ms << ',' << stats.active_tm_minicolumns << '\n';
    }
}

namespace
{

std::vector<std::string_view> split_csv(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true)
    {
        const std::size_t c = line.find(',', pos);
        out.push_back(line.substr(pos, c == std::string_view::npos ? std::string_view::npos : c - pos));
        if (c == std::string_view::npos)
        {
            break;
        }
        pos = c + 1;
    }
    return out;
}

template <typename Fn>
void for_each_csv(std::string_view text, std::size_t fields, const char *what, Fn &&fn)
{
    const std::string source = what;
    for_each_line(text, [&](int line, const std::vector<std::string_view> &tok) {
        if (tok.size() != 1)
        {
            throw FormatError(source, line, "unexpected whitespace");
        }
        auto cols = split_csv(tok[0]);
        if (cols.size() != fields)
        {
            throw FormatError(source, line, "expected " + std::to_string(fields) + " columns");
        }
        fn(Fields(source, line, cols));
    });
}

} // namespace

std::vector<EventRecord> parse_event_records(std::string_view text)
{
    std::vector<EventRecord> out;
    for_each_csv(text, 4, "<events>", [&](const Fields &f) {
        EventRecord r;
        r.time_ms = static_cast<std::uint32_t>(f.integer(0, 0, kU32Max, "time"));
        r.addr = MiniAddr(f.hex(1, MiniAddr::kAddrMask, "address"));
        r.type = static_cast<int>(f.integer(2, 0, kNeuronTypes - 1, "type"));
        r.count = static_cast<int>(f.integer(3, 1, Count4::kMax, "count"));
        out.push_back(r);
    });
    return out;
}

std::vector<StatsRecord> parse_stats_records(std::string_view text)
{
    std::vector<StatsRecord> out;
    for_each_csv(text, 2, "<stats>", [&](const Fields &f) {
        StatsRecord r;
        r.time_ms = static_cast<std::uint32_t>(f.integer(0, 0, kU32Max, "time"));
        r.active = static_cast<std::size_t>(f.integer(1, 0, MiniAddr::kAddrMask + 1ll, "active"));
        out.push_back(r);
    });
    return out;
}

void AuditoryLayout::validate() const
{
    if (channels < 1 || static_cast<std::size_t>(channels) * 4 > RangeCam::kCapacity)
    {
        throw std::invalid_argument("channels must be in [1, 128]");
    }
    if (hypercolumns < 3)
    {
        throw std::invalid_argument("at least 3 hypercolumns per channel");
    }
    if (stride() < static_cast<std::uint32_t>(hypercolumns + kSourcesPerChannel))
    {
        throw std::invalid_argument("channels x (hypercolumns + sources) exceeds the hypercolumn space");
    }
}

MiniAddr AuditoryLayout::cortex_addr(int channel, int hyper, int mini) const
{
    return MiniAddr(static_cast<std::uint32_t>(channel) * stride() + static_cast<std::uint32_t>(hyper),
            static_cast<std::uint32_t>(mini));
}

MiniAddr AuditoryLayout::source_addr(int channel, int source) const
{
    return MiniAddr(static_cast<std::uint32_t>(channel) * stride() + static_cast<std::uint32_t>(hypercolumns + source),
            0);
}

int AuditoryLayout::channel_of(MiniAddr a) const
{
    const std::uint32_t c = a.hyper() / stride();
    const std::uint32_t local = a.hyper() % stride();
    if (c >= static_cast<std::uint32_t>(channels) || local >= static_cast<std::uint32_t>(hypercolumns) ||
            a.mini() >= static_cast<std::uint32_t>(kMinicolumns))
    {
        return -1;
    }
    return static_cast<int>(c);
}

bool AuditoryLayout::is_source(MiniAddr a) const
{
    const std::uint32_t c = a.hyper() / stride();
    const std::uint32_t local = a.hyper() % stride();
    return c < static_cast<std::uint32_t>(channels) && local >= static_cast<std::uint32_t>(hypercolumns) &&
            local < static_cast<std::uint32_t>(hypercolumns + kSourcesPerChannel) && a.mini() == 0;
}

std::size_t AuditoryLayout::cortical_minicolumns() const
{
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(hypercolumns) * kMinicolumns;
}

namespace
{

constexpr int kFanout = 8;

/// masks[d] bits over source types.
using MaskSet = std::array<std::uint8_t, kNeuronTypes>;

// L2/3E=0 L2/3I=1 L4E=2 L4I=3 L5/6E=4 L5/6I=5
constexpr MaskSet kIntraMasks{
        0b0001'0110, // L2/3E <- L4E, L5/6E, L2/3I
        0b0000'0100, // L2/3I <- L4E
        0b0000'1000, // L4E   <- L4I
        0b0000'0000,
        0b0010'0001, // L5/6E <- L2/3E, L5/6I
        0b0000'0001, // L5/6I <- L2/3E
        0,
        0,
};
// L2/3E -> {L2/3E, L4E}, L5/6E -> L5/6E
constexpr MaskSet kInterMasks{0b0000'0001, 0, 0b0000'0001, 0, 0b0001'0000, 0, 0, 0};
constexpr MaskSet kSourceMasks{0, 0, 0b0000'0001, 0, 0, 0, 0, 0}; // L4E only
constexpr std::array<int, kNeuronTypes> kCortexWeights{3, -8, 3, -8, 3, -8, 0, 0};
constexpr std::array<int, kNeuronTypes> kSourceWeights{3, 0, 0, 0, 0, 0, 0, 0};

/// Poisson(lambda) by inversion of the cumulative distribution.
int poisson(RngStream &rng, double lambda)
{
    const double u = rng.uniform();
    double p = std::exp(-lambda);
    double cdf = p;
    int k = 0;
    while (u > cdf && k < 1000)
    {
        ++k;
        p *= lambda / k;
        cdf += p;
    }
    return k;
}

} // namespace

AuditoryNetwork gen_auditory(const AuditoryOptions &opts)
{
    const AuditoryLayout layout{opts.channels, opts.hypercolumns};
    layout.validate();
    if (opts.sweep_ms < 1 || opts.repeats < 0 || !(opts.rate_hz >= 0.0))
    {
        throw std::invalid_argument("sweep_ms >= 1, repeats >= 0 and rate_hz >= 0 required");
    }
    if (opts.intra_delay_ms < 1 || opts.intra_delay_ms > kDelayClasses || opts.inter_delay_ms < 1 ||
            opts.inter_delay_ms > kDelayClasses)
    {
        throw std::invalid_argument("delays must be in [1, 16] ms");
    }

    const int H = opts.hypercolumns;
    const std::uint32_t wrap = 1u << MiniAddr::kHyperBits;
    const auto back = [&](std::uint32_t n) { return (wrap - n) & MiniAddr::kHyperMask; };

    AuditoryNetwork out;
    NetworkDescription &net = out.network;
    net.seed = opts.seed;

    for (int c = 0; c < opts.channels; ++c)
    {
        const std::uint32_t base = static_cast<std::uint32_t>(c) * layout.stride();
        net.ranges.push_back({MiniAddr(base, 0).raw, 0, 0});
        net.ranges.push_back({MiniAddr(base + 1, 0).raw, 0, 1});
        net.ranges.push_back({MiniAddr(base + static_cast<std::uint32_t>(H) - 1, 0).raw, 0, 2});
        net.ranges.push_back({MiniAddr(base + static_cast<std::uint32_t>(H), 0).raw, 0, 3});
    }

    const std::array<double, 4> tau{5.8, 5.8, 5.8, 3.0};
    for (int k = 0; k < static_cast<int>(AuditoryLayout::kCounts.size()); ++k)
    {
        TypeLine t;
        t.param_type_id = 0;
        t.slot = k;
        t.count = AuditoryLayout::kCounts[k];
        t.tau_epsc = tau[0];
        t.tau_ipsc = tau[1];
        t.tau_mem = tau[2];
        t.tau_rfc = tau[3];
        net.types.push_back(t);
    }

    // Slot 0 stays inside the hypercolumn; slots 1 and 2 reach the two
    // neighbours, wrapping at the channel edges.
    const std::array<std::array<std::uint32_t, 3>, 3> offsets{{
            {0, 1, static_cast<std::uint32_t>(H - 1)},
            {0, 1, back(1)},
            {0, back(static_cast<std::uint32_t>(H - 1)), back(1)},
    }};
    for (std::uint32_t conn = 0; conn < 3; ++conn)
    {
        for (int slot = 0; slot < 3; ++slot)
        {
            const bool intra = slot == 0;
            net.posts.push_back({conn, slot, intra ? opts.intra_delay_ms : opts.inter_delay_ms});
            net.pres.push_back({conn, slot, offsets[conn][slot], kFanout, AuditoryLayout::kMinicolumns});
            net.weights.push_back({conn, slot, kCortexWeights});
            net.masks.push_back({conn, slot, intra ? kIntraMasks : kInterMasks});
        }
    }
    net.posts.push_back({3, 0, 1});
    net.pres.push_back({3, 0, back(static_cast<std::uint32_t>(H)), kFanout, AuditoryLayout::kMinicolumns});
    net.weights.push_back({3, 0, kSourceWeights});
    net.masks.push_back({3, 0, kSourceMasks});

    RngStream rng = RngStream::derive(opts.seed, 0x5717'0000ull);
    const double lambda = opts.rate_hz * 100.0 / 1000.0;
    for (int rep = 0; rep < opts.repeats; ++rep)
    {
        for (int c = 0; c < opts.channels; ++c)
        {
            const std::uint32_t t0 = window_start(opts, rep, c);
            for (int dt = 0; dt < opts.sweep_ms; ++dt)
            {
                for (int k = 0; k < AuditoryLayout::kSourcesPerChannel; ++k)
                {
                    const int n = poisson(rng, lambda);
                    if (n == 0)
                    {
                        continue;
                    }
                    StimulusEvent ev;
                    ev.time_ms = t0 + static_cast<std::uint32_t>(dt);
                    ev.event.source = layout.source_addr(c, k);
                    ev.event.counts[0] = Count4(n);
                    out.stimulus.push_back(ev);
                }
            }
        }
    }
    return out;
}

FigureData emit_figures(const std::vector<EventRecord> &events, const std::vector<StatsRecord> &stats,
        const AuditoryLayout &layout, int bin_ms, std::uint32_t duration_ms)
{
    if (bin_ms < 1)
    {
        throw std::invalid_argument("bin width must be >= 1 ms");
    }
    FigureData fig;
    fig.channels = layout.channels;
    fig.bin_ms = bin_ms;
    fig.bins = static_cast<int>((duration_ms + static_cast<std::uint32_t>(bin_ms) - 1) / static_cast<std::uint32_t>(bin_ms));
    const std::size_t cells = static_cast<std::size_t>(fig.channels) * static_cast<std::size_t>(fig.bins);
    fig.excitatory.assign(cells, 0.0);
    fig.inhibitory.assign(cells, 0.0);

    auto is_in = [](const auto &set, int t) { return std::find(set.begin(), set.end(), t) != set.end(); };
    for (const auto &r : events)
    {
        const int c = layout.channel_of(r.addr);
        if (c < 0 || r.time_ms >= duration_ms)
        {
            continue;
        }
        const std::size_t cell = static_cast<std::size_t>(c) * fig.bins + r.time_ms / static_cast<std::uint32_t>(bin_ms);
        if (is_in(AuditoryLayout::kExcitatoryTypes, r.type))
        {
            fig.excitatory[cell] += r.count;
        }
        else if (is_in(AuditoryLayout::kInhibitoryTypes, r.type))
        {
            fig.inhibitory[cell] += r.count;
        }
    }

    // spikes per neuron per ms, then scaled to the grid maximum
    auto normalize = [&](std::vector<double> &grid, const std::array<int, 3> &types) {
        int per_mini = 0;
        for (int t : types)
        {
            per_mini += AuditoryLayout::kCounts[t];
        }
        const double neurons = static_cast<double>(per_mini) * layout.hypercolumns * AuditoryLayout::kMinicolumns;
        double peak = 0.0;
        for (double &v : grid)
        {
            v /= neurons * bin_ms;
            peak = std::max(peak, v);
        }
        if (peak > 0.0)
        {
            for (double &v : grid)
            {
                v /= peak;
            }
        }
    };
    normalize(fig.excitatory, AuditoryLayout::kExcitatoryTypes);
    normalize(fig.inhibitory, AuditoryLayout::kInhibitoryTypes);
    fig.active = stats;
    return fig;
}

std::string grid_csv(const FigureData &fig, const std::vector<double> &grid)
{
    std::ostringstream o;
    o << "channel";
    for (int b = 0; b < fig.bins; ++b)
    {
        o << ',' << b * fig.bin_ms;
    }
    o << '\n';
    for (int c = 0; c < fig.channels; ++c)
    {
        o << c;
        for (int b = 0; b < fig.bins; ++b)
        {
            o << ',' << fmt_double(grid[static_cast<std::size_t>(c) * fig.bins + b]);
        }
        o << '\n';
    }
    return o.str();
}

std::string active_csv(const FigureData &fig, std::size_t cortical_minicolumns)
{
    std::ostringstream o;
    o << "time_ms,active,fraction\n";
    for (const auto &s : fig.active)
    {
        o << s.time_ms << ',' << s.active << ','
          << fmt_double(cortical_minicolumns ? static_cast<double>(s.active) / cortical_minicolumns : 0.0) << '\n';
    }
    return o.str();
}

} // namespace cortex::netio
