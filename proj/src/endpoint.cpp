// SPDX-License-Identifier: Apache-2.0
#include <spectool/endpoint.hpp>

#include <cmath>
#include <fmt/format.h>

namespace spectool
{

void MainEndpoint::submit_tool_cache(const ResponseId&, CacheSubmit)
{
    throw Error(Errc::ConfigError, "this endpoint has no tool cache");
}

FixedLatencyEndpoint::FixedLatencyEndpoint(sim::Kernel& kernel, double overhead): _kernel(kernel), _overhead(overhead)
{
    if (!(overhead >= 0 && std::isfinite(overhead)))
        throw Error(Errc::ConfigError, "overhead must be non-negative");
}

ResponseId FixedLatencyEndpoint::call(MainCall call, MainHandlers handlers)
{
    if (!call.script)
        throw Error(Errc::ConfigError, "main call without a script");
    auto rid = fmt::format("mock-{:06d}", _nextId++);
    auto generation = main_generate(*call.script, call.turn, call.historyTokens);
    MainReply reply { rid, call.turn, std::move(generation.tokens) };
    _kernel.schedule(_overhead + generation.latency, fmt::format("main.reply {}", rid),
                     [cb = std::move(handlers.onReply), reply = std::move(reply)]() mutable {
                         if (cb)
                             cb(std::move(reply));
                     });
    return rid;
}

ResponseId EngineEndpoint::call(MainCall call, MainHandlers handlers)
{
    EngineEvents events;
    if (handlers.onReply)
        events.onEmit = [cb = std::move(handlers.onReply)](Emission e) {
            cb(MainReply { std::move(e.rid), e.turn, std::move(e.tokens) });
        };
    events.onIngest = std::move(handlers.onIngest);
    return _engine.submit_request(
        EngineRequest { std::move(call.script), call.turn, call.historyTokens, std::move(call.session) },
        std::move(events));
}

void EngineEndpoint::submit_tool_cache(const ResponseId& rid, CacheSubmit entry)
{
    if (!accepts_tool_cache())
        throw Error(Errc::ConfigError, "engine runs without a tool cache");
    _engine.submit_tool_cache(rid, std::move(entry));
}

} // namespace spectool
