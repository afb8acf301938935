// SPDX-License-Identifier: Apache-2.0
#pragma once

// Deterministic discrete-event kernel. All logical concurrency (speculative
// samples, concurrent agents, engine sequences) is expressed as interleaved
// events on one queue ordered by (fire time, scheduling sequence).

#include <spectool/error.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

namespace spectool::sim
{

using Seconds = double;

struct EventHandle
{
    std::uint64_t seq = 0;
};

class Kernel
{
  public:
    using Action = std::function<void()>;

    Kernel() = default;
    Kernel(const Kernel&) = delete;
    Kernel& operator=(const Kernel&) = delete;

    /// Fires `action` at now + delay. Throws InvalidDelay for negative or
    /// non-finite delays.
    EventHandle schedule(Seconds delay, std::string name, Action action);

    /// Cancelled events are dropped without running and without advancing
    /// the clock.
    bool cancel(EventHandle handle);

    /// Runs one event; false when the queue is empty.
    bool step();

    /// Drains the queue and returns the final clock.
    Seconds run_until_idle();

    [[nodiscard]] Seconds now() const noexcept { return _now; }
    [[nodiscard]] std::optional<Seconds> next_time();
    [[nodiscard]] bool idle() const noexcept { return _pending.empty(); }
    [[nodiscard]] std::uint64_t executed() const noexcept { return _executed; }

    /// One line per executed event: `t=<seconds> seq=<n> action=<name>`.
    void set_trace(std::ostream* trace) noexcept { _trace = trace; }

  private:
    struct Event
    {
        Seconds fireAt;
        std::uint64_t seq;
        std::string name;
        Action action;
    };

    struct Later
    {
        bool operator()(const Event& a, const Event& b) const noexcept
        {
            if (a.fireAt != b.fireAt)
                return a.fireAt > b.fireAt;
            return a.seq > b.seq;
        }
    };

    void drop_cancelled_head();

    std::priority_queue<Event, std::vector<Event>, Later> _queue;
    std::unordered_set<std::uint64_t> _pending;
    Seconds _now = 0;
    std::uint64_t _nextSeq = 0;
    std::uint64_t _executed = 0;
    std::ostream* _trace = nullptr;
};

/// Runs a kernel against the wall clock on a background thread: virtual
/// delays become real sleeps. Other threads hand work to the kernel through
/// post(); posted actions run at the current wall time, in posting order.
class WallClockAdapter
{
  public:
    explicit WallClockAdapter(Kernel& kernel);
    ~WallClockAdapter();
    WallClockAdapter(const WallClockAdapter&) = delete;
    WallClockAdapter& operator=(const WallClockAdapter&) = delete;

    void start();
    void stop();

    void post(std::string name, Kernel::Action action);

    /// Posts `query` and blocks until it has run on the kernel thread.
    void call(std::string name, const Kernel::Action& query);

    [[nodiscard]] Seconds elapsed() const;

  private:
    void loop();

    Kernel& _kernel;
    std::mutex _mutex;
    std::condition_variable _wake;
    std::deque<std::pair<std::string, Kernel::Action>> _inbox;
    std::thread _thread;
    bool _running = false;
    std::chrono::steady_clock::time_point _origin;
};

} // namespace spectool::sim
