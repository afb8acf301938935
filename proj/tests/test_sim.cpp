// SPDX-License-Identifier: Apache-2.0
#include "helpers.hpp"

#include <spectool/sim.hpp>

#include <atomic>
#include <cmath>
#include <random>
#include <sstream>

using namespace spectool;
using spectool::sim::Kernel;

TEST(Kernel, EqualTimesRunInSchedulingOrder)
{
    Kernel k;
    std::string order;
    k.schedule(0, "a", [&] { order += 'a'; });
    k.schedule(0, "b", [&] { order += 'b'; });
    k.run_until_idle();
    EXPECT_EQ(order, "ab");
}

TEST(Kernel, DelayIsRelativeToNow)
{
    Kernel k;
    double observed = -1;
    k.schedule(2.0, "outer", [&] { k.schedule(1.5, "inner", [&] { observed = k.now(); }); });
    k.run_until_idle();
    EXPECT_EQ(observed, 3.5);
}

TEST(Kernel, InvalidDelays)
{
    Kernel k;
    EXPECT_ERRC(k.schedule(-1, "neg", [] {}), Errc::InvalidDelay);
    EXPECT_ERRC(k.schedule(std::nan(""), "nan", [] {}), Errc::InvalidDelay);
    EXPECT_ERRC(k.schedule(INFINITY, "inf", [] {}), Errc::InvalidDelay);
}

TEST(Kernel, RunUntilIdle)
{
    Kernel empty;
    EXPECT_EQ(empty.run_until_idle(), 0.0);

    Kernel two;
    two.schedule(1, "one", [] {});
    two.schedule(3, "three", [] {});
    EXPECT_EQ(two.run_until_idle(), 3.0);

    Kernel cascade;
    cascade.schedule(1, "first", [&] { cascade.schedule(1, "second", [] {}); });
    EXPECT_EQ(cascade.run_until_idle(), 2.0);
}

TEST(Kernel, CancelledEventsNeitherRunNorAdvanceTime)
{
    Kernel k;
    bool ran = false;
    k.schedule(1, "keep", [] {});
    auto const h = k.schedule(5, "drop", [&] { ran = true; });
    EXPECT_TRUE(k.cancel(h));
    EXPECT_FALSE(k.cancel(h));
    EXPECT_EQ(k.run_until_idle(), 1.0);
    EXPECT_FALSE(ran);
    EXPECT_EQ(k.executed(), 1U);
}

TEST(Kernel, FailuresCarryEventContext)
{
    Kernel k;
    k.schedule(0.5, "boom", [] { throw std::runtime_error("inner"); });
    try
    {
        k.run_until_idle();
        FAIL() << "expected failure";
    }
    catch (const Error& e)
    {
        EXPECT_EQ(e.code(), Errc::SimulationError);
        EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
        try
        {
            std::rethrow_if_nested(e);
            FAIL() << "expected nested exception";
        }
        catch (const std::runtime_error& inner)
        {
            EXPECT_STREQ(inner.what(), "inner");
        }
    }
}

TEST(Kernel, TraceFormat)
{
    Kernel k;
    std::ostringstream trace;
    k.set_trace(&trace);
    k.schedule(0.25, "x", [] {});
    k.run_until_idle();
    EXPECT_EQ(trace.str(), "t=0.250000000 seq=0 action=x\n");
}

TEST(Kernel, RandomInterleavingsKeepClockMonotoneAndDeterministic)
{
    auto const run = [](std::uint64_t seed) {
        Kernel k;
        std::ostringstream trace;
        k.set_trace(&trace);
        std::mt19937_64 rng(seed);
        double last = 0;
        bool monotone = true;
        std::function<void(int)> spawn = [&](int depth) {
            if (k.now() < last)
                monotone = false;
            last = k.now();
            if (depth == 0)
                return;
            for (int i = 0; i < 3; ++i)
            {
                auto const delay = static_cast<double>(rng() % 4) * 0.25;
                k.schedule(delay, "n" + std::to_string(depth), [&spawn, depth] { spawn(depth - 1); });
            }
        };
        k.schedule(0, "root", [&] { spawn(5); });
        auto const end = k.run_until_idle();
        EXPECT_TRUE(monotone);
        return std::pair { end, trace.str() };
    };
    auto const a = run(42);
    auto const b = run(42);
    EXPECT_EQ(a, b);
}

TEST(WallClockAdapter, PostAndCall)
{
    Kernel k;
    sim::WallClockAdapter adapter(k);
    adapter.start();
    std::atomic<int> value { 0 };
    adapter.post("set", [&] { value = 1; });
    int seen = 0;
    adapter.call("read", [&] { seen = value.load(); });
    EXPECT_EQ(seen, 1);

    std::atomic<bool> fired { false };
    adapter.post("delay", [&] { k.schedule(0.05, "later", [&] { fired = true; }); });
    for (int i = 0; i < 200 && !fired; ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    EXPECT_TRUE(fired);

    EXPECT_THROW(adapter.call("throws", [] { throw std::runtime_error("x"); }), std::runtime_error);
    adapter.stop();
}
