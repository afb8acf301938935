// SPDX-License-Identifier: Apache-2.0
#include "helpers.hpp"

#include <spectool/analytic.hpp>

#include <cmath>
#include <random>
#include <sstream>

using namespace spectool;
using namespace spectool::analytic;

namespace
{

ClientScenario client(double G, double g, double T, double alpha, std::size_t N = 1)
{
    return { G, g, T, alpha, N };
}

EngineScenario two_turn(double alpha)
{
    EngineScenario s;
    s.overhead = 0.05;
    s.prefillRate = 0.001;
    s.decodeRate = 0.02;
    s.promptTokens = 1000;
    s.turns = { { 100, 20, 200, 1.0 }, { 100, 20, 200, 1.0 } };
    s.acceptance = alpha;
    return s;
}

void expect_rel(double actual, double expected, double tol = 1e-12)
{
    EXPECT_LE(std::fabs(actual - expected), tol * std::max(1.0, std::fabs(expected)))
        << "actual " << actual << " expected " << expected;
}

} // namespace

TEST(ClientModel, StandardTime)
{
    expect_rel(standard_time(client(2, 0.5, 1, 0, 10)), 30.0);
    expect_rel(standard_time(client(1, 0.5, 0.000001, 0, 1)), 1.000001);
    expect_rel(standard_time(client(2, 0.5, 2, 0, 5)), 20.0);
}

TEST(ClientModel, SpeculativeTime)
{
    expect_rel(speculative_time(client(2, 0.5, 2, 0.8)), 2.8);
    expect_rel(speculative_time(client(2, 0.1, 0.5, 1.0)), 2.0);
    auto const s = client(3, 1, 4, 0, 7);
    expect_rel(speculative_time(s), standard_time(s));
}

TEST(ClientModel, RealizedHitsMatchBranches)
{
    auto const s = client(2, 0.5, 2, 0.0, 3);
    std::array<bool, 3> arr { true, false, true };
    expect_rel(speculative_time_realized(s, arr), 2.5 + 4 + 2.5);
}

TEST(ClientModel, Speedup)
{
    expect_rel(client_speedup(client(2, 0.5, 2, 0)), 1.0);
    expect_rel(client_speedup(client(2, 0.5, 2, 0.8)), 4.0 / 2.8);
    expect_rel(client_speedup(client(1, 1, 1, 0.5)), 1.0);
    // Independent of N.
    expect_rel(client_speedup(client(2, 0.5, 2, 0.8, 1)), client_speedup(client(2, 0.5, 2, 0.8, 9)));
}

TEST(ClientModel, Bound)
{
    auto const b = speedup_bound(client(2, 0.5, 2, 0.3));
    expect_rel(b.maximum, 1.6);
    expect_rel(b.cap, 2.0 - 1.0 / 4.5);
    EXPECT_LE(b.maximum, b.cap);

    auto const nearZero = speedup_bound(client(1, 1e-9, 1, 0));
    EXPECT_NEAR(nearZero.cap, 2.0, 1e-8);
    EXPECT_LT(nearZero.cap, 2.0);

    expect_rel(speedup_bound(client(1, 0.999, 1, 0)).maximum, 2.0 / 1.999);

    EXPECT_ERRC(speedup_bound(client(1, 1, 1, 0)), Errc::LemmaHypothesisViolated);
    EXPECT_ERRC(speedup_bound(client(1, 2, 1, 0)), Errc::LemmaHypothesisViolated);
}

TEST(ClientModel, InvalidScenarios)
{
    EXPECT_ERRC(standard_time(client(0, 0.5, 1, 0)), Errc::InvalidScenario);
    EXPECT_ERRC(standard_time(client(1, 0, 1, 0)), Errc::InvalidScenario);
    EXPECT_ERRC(standard_time(client(1, 0.5, 0, 0)), Errc::InvalidScenario);
    EXPECT_ERRC(standard_time(client(1, 0.5, 1, 1.5)), Errc::InvalidScenario);
    EXPECT_ERRC(standard_time(client(1, 0.5, 1, -0.1)), Errc::InvalidScenario);
    EXPECT_ERRC(standard_time(client(1, 0.5, 1, 0, 0)), Errc::InvalidScenario);
    EXPECT_ERRC(standard_time(client(std::nan(""), 0.5, 1, 0)), Errc::InvalidScenario);
}

TEST(ClientModel, LemmaProperties)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> pos(1e-3, 10.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 1000; ++i)
    {
        double G = pos(rng), g = pos(rng), T = pos(rng);
        if (g >= G)
            std::swap(g, G);
        if (g == G)
            continue;
        double a1 = unit(rng), a2 = unit(rng);
        if (a1 > a2)
            std::swap(a1, a2);
        auto const s1 = client_speedup(client(G, g, T, a1));
        auto const s2 = client_speedup(client(G, g, T, a2));
        if (a2 > a1)
        {
            EXPECT_LT(s1, s2);
        }
        EXPECT_EQ(client_speedup(client(G, g, T, 0)), 1.0);
        expect_rel(client_speedup(client(G, g, T, 1)), (G + T) / std::max(G, g + T));
        EXPECT_LE(s2, 2 - 2 * g / (G + g + T));
    }
}

TEST(EngineModel, TwoTurnValues)
{
    auto const s = two_turn(1.0);
    auto const x = prompt_lengths(s);
    ASSERT_EQ(x.size(), 3U);
    EXPECT_EQ(x[0], 1000);
    EXPECT_EQ(x[1], 1220);
    EXPECT_EQ(x[2], 1440);
    // 0.2 + 2.22 + 4.8 + 2.0 and 0.2 + 1.44 + 4.8 + 2.0
    expect_rel(vanilla_time(s), 9.22);
    expect_rel(prefix_cached_time(s), 8.44);
    expect_rel(tool_cache_time(s), 5.48);
    expect_rel(tool_cache_time(two_turn(0.0)), 8.44);
    expect_rel(tool_cache_time(two_turn(0.5)), 6.96);
}

TEST(EngineModel, FullAcceptanceSavingDecomposes)
{
    auto const s = two_turn(1.0);
    // 2Ko + delta*(sum t - K) + sum T = 0.2 + 0.76 + 2.0
    expect_rel(full_acceptance_saving(s), 2.96);
    expect_rel(prefix_cached_time(s) - tool_cache_time(s), full_acceptance_saving(s));
}

TEST(EngineModel, RealizedHits)
{
    auto const s = two_turn(0.0);
    std::array<bool, 2> allHit { true, true };
    std::array<bool, 2> none { false, false };
    std::array<bool, 2> first { true, false };
    expect_rel(tool_cache_time_realized(s, allHit), 5.48);
    expect_rel(tool_cache_time_realized(s, none), 8.44);
    // Hit turn 1: saves 2o + delta*(t-1) + T = 0.1 + 0.38 + 1.0.
    expect_rel(tool_cache_time_realized(s, first), 8.44 - 1.48);
}

TEST(EngineModel, Degenerate)
{
    EngineScenario s;
    s.decodeRate = 0.02;
    s.prefillRate = 0.001;
    s.turns = { { 0, 1, 0, 0 } };
    expect_rel(vanilla_time(s), 0.02);

    EngineScenario toolsOnly = two_turn(0);
    toolsOnly.overhead = 0;
    toolsOnly.prefillRate = 0;
    toolsOnly.decodeRate = 0;
    expect_rel(vanilla_time(toolsOnly), 2.0);

    auto noPrefill = two_turn(0);
    noPrefill.prefillRate = 0;
    expect_rel(prefix_cached_time(noPrefill), vanilla_time(noPrefill));
}

TEST(EngineModel, PrefillGapIdentity)
{
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i)
    {
        EngineScenario s;
        s.overhead = static_cast<double>(rng() % 100) / 1000;
        s.prefillRate = 1e-4 * static_cast<double>(1 + rng() % 50);
        s.decodeRate = 1e-3 * static_cast<double>(1 + rng() % 50);
        s.promptTokens = static_cast<double>(rng() % 2000);
        for (std::size_t k = 0; k < 1 + rng() % 5; ++k)
            s.turns.push_back({ static_cast<double>(rng() % 200), static_cast<double>(1 + rng() % 40),
                                static_cast<double>(rng() % 300), static_cast<double>(rng() % 30) / 10 });
        auto const x = prompt_lengths(s);
        double sumX = 0;
        for (std::size_t k = 0; k < s.turnCount(); ++k)
            sumX += x[k];
        expect_rel(vanilla_time(s) - prefix_cached_time(s), s.prefillRate * (sumX - x.back()), 1e-9);
        s.acceptance = 0;
        expect_rel(tool_cache_time(s), prefix_cached_time(s));
        s.acceptance = 1;
        expect_rel(prefix_cached_time(s) - tool_cache_time(s), full_acceptance_saving(s), 1e-12);
    }
}

TEST(EngineModel, InvalidScenarios)
{
    auto s = two_turn(0.5);
    s.turns.clear();
    EXPECT_ERRC(vanilla_time(s), Errc::InvalidScenario);
    s = two_turn(0.5);
    s.turns[0].callTokens = 0;
    EXPECT_ERRC(vanilla_time(s), Errc::InvalidScenario);
    s = two_turn(0.5);
    s.overhead = -1;
    EXPECT_ERRC(prefix_cached_time(s), Errc::InvalidScenario);
    s = two_turn(1.5);
    EXPECT_ERRC(tool_cache_time(s), Errc::InvalidScenario);
}

TEST(Range, Parsing)
{
    auto const r = Range::parse("0:1:0.25").values();
    ASSERT_EQ(r.size(), 5U);
    EXPECT_DOUBLE_EQ(r.back(), 1.0);
    EXPECT_EQ(Range::parse("2:2:1").values(), std::vector<double> { 2.0 });
    EXPECT_TRUE(Range::parse("1:0:0.5").values().empty());
    // Accumulated float error must not drop the endpoint.
    EXPECT_EQ(Range::parse("0:1:0.1").values().size(), 11U);
    for (auto const* bad: { "", "1", "1:2", "a:b:c", "0:1:0", "0:1:-1", "0:1:1:1" })
        EXPECT_ERRC(Range::parse(bad), Errc::ConfigError);
}

TEST(Sweep, GridAndCsv)
{
    SweepGrid grid { Range::parse("0:1:0.25").values(), { 0.25 }, { 2.0 }, 2.0 };
    auto const rows = sweep_client(grid);
    ASSERT_EQ(rows.size(), 5U);
    for (auto const& r: rows)
        EXPECT_LT(r.speedup, 2.0);
    EXPECT_EQ(rows.front().speedup, 1.0);

    std::ostringstream csv;
    write_sweep_csv(csv, rows);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "alpha,g_over_G,T,speedup");

    EXPECT_ERRC(sweep_client(SweepGrid { {}, { 0.5 }, { 1 }, 1 }), Errc::EmptyGrid);
    EXPECT_ERRC(sweep_client(SweepGrid { { 0.5 }, {}, { 1 }, 1 }), Errc::EmptyGrid);
    EXPECT_ERRC(sweep_client(SweepGrid { { 0.5 }, { 0.5 }, {}, 1 }), Errc::EmptyGrid);

    auto const single = sweep_client(SweepGrid { { 0.0 }, { 0.5 }, { 1.0 }, 1.0 });
    ASSERT_EQ(single.size(), 1U);
    EXPECT_EQ(single[0].speedup, 1.0);
}

TEST(Sweep, PeakNearMainLatency)
{
    SweepGrid grid { { 1.0 }, { 0.25 }, { 0.02, 2.0, 200.0 }, 2.0 };
    auto const rows = sweep_client(grid);
    ASSERT_EQ(rows.size(), 3U);
    EXPECT_GT(rows[1].speedup, rows[0].speedup);
    EXPECT_GT(rows[1].speedup, rows[2].speedup);
}
