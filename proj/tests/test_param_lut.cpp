#include <doctest.h>

#include <algorithm>

#include "cortex/param_lut.hpp"
#include "fixtures.hpp"

using namespace cortex;

namespace
{

/// Largest i with thresholds[i] <= addr, by linear scan.
std::size_t linear_lookup(const std::vector<std::uint32_t> &th, std::uint32_t addr)
{
    std::size_t hit = 0;
    for (std::size_t i = 0; i < th.size(); ++i)
    {
        if (th[i] <= addr)
        {
            hit = i;
        }
    }
    return hit;
}

} // namespace

TEST_CASE("range lookup examples")
{
    const RangeCam cam({0, 100, 5000});
    CHECK(cam.lookup(MiniAddr(0u)) == 0);
    CHECK(cam.lookup(MiniAddr(99u)) == 0);
    CHECK(cam.lookup(MiniAddr(100u)) == 1);
    CHECK(cam.lookup(MiniAddr(4999u)) == 1);
    CHECK(cam.lookup(MiniAddr(5000u)) == 2);
    CHECK(cam.lookup(MiniAddr(MiniAddr::kAddrMask)) == 2);
}

TEST_CASE("range lookup matches a linear scan")
{
    RngStream rng(8);
    for (int trial = 0; trial < 50; ++trial)
    {
        const std::size_t n = 1 + rng.below(512);
        std::vector<std::uint32_t> th{0};
        while (th.size() < n)
        {
            th.push_back(1 + rng.below(MiniAddr::kAddrMask));
        }
        std::sort(th.begin(), th.end());
        th.erase(std::unique(th.begin(), th.end()), th.end());
        const RangeCam cam(th);
        for (int i = 0; i < 2000; ++i)
        {
            const auto a = static_cast<std::uint32_t>(rng.next()) & MiniAddr::kAddrMask;
            REQUIRE(cam.lookup(MiniAddr(a)) == linear_lookup(th, a));
        }
        for (auto t : th)
        {
            REQUIRE(cam.lookup(MiniAddr(t)) == linear_lookup(th, t));
        }
    }
}

TEST_CASE("range table validation")
{
    std::vector<std::uint32_t> th(512);
    for (std::size_t i = 0; i < th.size(); ++i)
    {
        th[i] = static_cast<std::uint32_t>(i * 7);
    }
    CHECK_NOTHROW(RangeCam{th});
    th.push_back(512 * 7);
    CHECK_THROWS_AS(RangeCam{th}, std::invalid_argument);

    CHECK_THROWS_AS(RangeCam(std::vector<std::uint32_t>{}), std::invalid_argument);
    CHECK_THROWS_AS(RangeCam({5, 10}), std::invalid_argument);
    CHECK_THROWS_AS(RangeCam({0, 10, 10}), std::invalid_argument);
    CHECK_THROWS_AS(RangeCam({0, 10, 9}), std::invalid_argument);
    CHECK_THROWS_AS(RangeCam({0, MiniAddr::kAddrMask + 1}), std::invalid_argument);
}

TEST_CASE("ranges share parameter and connection records by index")
{
    ConnectionSet a;
    fixture::enable(a, 0, 1, fixture::dense_rule(0, 4, 100, 3));
    ConnectionSet b;
    fixture::enable(b, 2, 5, fixture::dense_rule(7, 8, 64, -2));

    MinicolumnParams other = fixture::table_minicolumn();
    other.types[0].g_syn = Gain8(32);

    const ParamLut lut(RangeCam({0, MiniAddr(10, 0).raw, MiniAddr(20, 0).raw}),
            {{0, 1}, {1, 0}, {0, 1}}, {fixture::table_minicolumn(), other}, {a, b}, 77);

    const MiniAddr x(3, 5);
    const MiniAddr y(15, 0);
    const MiniAddr z(25, 99);
    CHECK(&lut.minicolumn_params(x) == &lut.minicolumn_params(z));
    CHECK(lut.minicolumn_params(y).types[0].g_syn.code == 32);
    CHECK(&lut.post_connections(x) == &lut.post_connections(z));
    CHECK(lut.post_connections(x).enabled_count() == 1);
    CHECK(lut.post_connections(x).slots[2].delay_class == 5);
    CHECK(lut.pre_connection(z, 2).offset == 7u);
    CHECK(lut.pre_connection(y, 0).fanout_size == 4);
    CHECK(lut.network_seed() == 77u);
    CHECK_THROWS_AS((void)lut.pre_connection(x, 0), std::logic_error);
    CHECK_THROWS_AS((void)lut.pre_connection(y, 16), std::logic_error);
}

TEST_CASE("lookup tables reject inconsistent records")
{
    ConnectionSet ok;
    fixture::enable(ok, 0, 1, fixture::dense_rule(0, 8, 100, 3));
    const auto mp = fixture::table_minicolumn();

    CHECK_THROWS_AS(ParamLut(RangeCam({0}), {{1, 0}}, {mp}, {ok}, 1), std::invalid_argument);
    CHECK_THROWS_AS(ParamLut(RangeCam({0}), {{0, 1}}, {mp}, {ok}, 1), std::invalid_argument);
    CHECK_THROWS_AS(ParamLut(RangeCam({0, 10}), {{0, 0}}, {mp}, {ok}, 1), std::invalid_argument);

    MinicolumnParams bad_reset = mp;
    bad_reset.types[3].v_reset = Code4(1);
    CHECK_THROWS_AS(ParamLut(RangeCam({0}), {{0, 0}}, {bad_reset}, {ok}, 1), std::invalid_argument);

    ConnectionSet wide = ok;
    wide.rules[0].fanout_size = 9;
    wide.rules[0].dest_hc_size = 8;
    CHECK_THROWS_AS(ParamLut(RangeCam({0}), {{0, 0}}, {mp}, {wide}, 1), std::invalid_argument);

    ConnectionSet big = ok;
    big.rules[0].dest_hc_size = 129;
    CHECK_THROWS_AS(ParamLut(RangeCam({0}), {{0, 0}}, {mp}, {big}, 1), std::invalid_argument);

    ConnectionSet no_delay = ok;
    no_delay.post.slots[0].delay_class = 0;
    CHECK_THROWS_AS(ParamLut(RangeCam({0}), {{0, 0}}, {mp}, {no_delay}, 1), std::invalid_argument);

    ConnectionSet far = ok;
    far.rules[0].offset = 1u << 20;
    CHECK_THROWS_AS(ParamLut(RangeCam({0}), {{0, 0}}, {mp}, {far}, 1), std::invalid_argument);

    // disabled slots are not validated
    ConnectionSet disabled = ok;
    disabled.rules[5].fanout_size = 0;
    CHECK_NOTHROW(ParamLut(RangeCam({0}), {{0, 0}}, {mp}, {disabled}, 1));
}
