// SPDX-License-Identifier: Apache-2.0
#include <spectool/sim.hpp>

#include <cmath>
#include <exception>
#include <fmt/format.h>
#include <cstdio>
#include <future>

namespace spectool::sim
{

EventHandle Kernel::schedule(Seconds delay, std::string name, Action action)
{
    if (!std::isfinite(delay) || delay < 0)
        throw Error(Errc::InvalidDelay, fmt::format("cannot schedule '{}' with delay {}", name, delay));
    auto const seq = _nextSeq++;
    _pending.insert(seq);
    _queue.push(Event { _now + delay, seq, std::move(name), std::move(action) });
    return EventHandle { seq };
}

bool Kernel::cancel(EventHandle handle)
{
    return _pending.erase(handle.seq) > 0;
}

void Kernel::drop_cancelled_head()
{
    while (!_queue.empty() && !_pending.contains(_queue.top().seq))
        _queue.pop();
}

std::optional<Seconds> Kernel::next_time()
{
    drop_cancelled_head();
    if (_queue.empty())
        return std::nullopt;
    return _queue.top().fireAt;
}

bool Kernel::step()
{
    drop_cancelled_head();
    if (_queue.empty())
        return false;

    // priority_queue::top is const; the event is moved out before popping.
    auto event = std::move(const_cast<Event&>(_queue.top()));
    _queue.pop();
    _pending.erase(event.seq);
    _now = event.fireAt;
    ++_executed;
    if (_trace)
        *_trace << fmt::format("t={:.9f} seq={} action={}\n", event.fireAt, event.seq, event.name);
    try
    {
        event.action();
    }
    catch (...)
    {
        std::throw_with_nested(Error(
            Errc::SimulationError, fmt::format("event '{}' seq={} at t={:.9f} failed", event.name, event.seq, _now)));
    }
    return true;
}

Seconds Kernel::run_until_idle()
{
    while (step())
    {
    }
    return _now;
}

WallClockAdapter::WallClockAdapter(Kernel& kernel): _kernel(kernel), _origin(std::chrono::steady_clock::now())
{
}

WallClockAdapter::~WallClockAdapter()
{
    stop();
}

void WallClockAdapter::start()
{
    std::lock_guard lock(_mutex);
    if (_running)
        return;
    _running = true;
    _origin = std::chrono::steady_clock::now() - std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                     std::chrono::duration<double>(_kernel.now()));
    _thread = std::thread([this] { loop(); });
}

void WallClockAdapter::stop()
{
    {
        std::lock_guard lock(_mutex);
        if (!_running)
            return;
        _running = false;
    }
    _wake.notify_all();
    if (_thread.joinable())
        _thread.join();
}

void WallClockAdapter::post(std::string name, Kernel::Action action)
{
    {
        std::lock_guard lock(_mutex);
        _inbox.emplace_back(std::move(name), std::move(action));
    }
    _wake.notify_all();
}

void WallClockAdapter::call(std::string name, const Kernel::Action& query)
{
    auto done = std::make_shared<std::promise<void>>();
    auto future = done->get_future();
    post(std::move(name), [&query, done] {
        try
        {
            query();
            done->set_value();
        }
        catch (...)
        {
            done->set_exception(std::current_exception());
        }
    });
    future.get();
}

Seconds WallClockAdapter::elapsed() const
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - _origin).count();
}

void WallClockAdapter::loop()
{
    std::unique_lock lock(_mutex);
    while (_running)
    {
        while (!_inbox.empty())
        {
            auto [name, action] = std::move(_inbox.front());
            _inbox.pop_front();
            auto const delay = std::max(0.0, elapsed() - _kernel.now());
            _kernel.schedule(delay, std::move(name), std::move(action));
        }

        auto const next = _kernel.next_time();
        if (next && *next <= elapsed())
        {
            lock.unlock();
            try
            {
                _kernel.step();
            }
            catch (const std::exception& e)
            {
                fmt::print(stderr, "wall-clock kernel: {}\n", e.what());
            }
            lock.lock();
            continue;
        }

        if (next)
            _wake.wait_for(lock, std::chrono::duration<double>(*next - elapsed()));
        else
            _wake.wait(lock);
    }
}

} // namespace spectool::sim
