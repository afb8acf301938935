// SPDX-License-Identifier: Apache-2.0
#pragma once

// POST /cache-tool-output/{response_id}: external speculation clients push
// pre-computed tool outputs into the engine's tool cache.

#include <spectool/engine.hpp>
#include <spectool/sim.hpp>
#include <spectool/tool_cache.hpp>

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace spectool
{

struct CacheServiceConfig
{
    std::size_t maxBodyBytes = 1U << 20;
};

struct ServiceResponse
{
    int status = 200;
    std::string body;
};

struct Rejection
{
    std::size_t index = 0;
    std::string error;
};

struct ParsedSubmissions
{
    std::vector<CacheSubmit> accepted;
    std::vector<Rejection> rejected;
};

/// Parses the JSON array body. Throws MalformedToolCall when the body is not
/// a JSON array; bad entries land in `rejected`.
[[nodiscard]] ParsedSubmissions parse_submissions(std::string_view body);

/// Where accepted entries go.
class CacheSink
{
  public:
    virtual ~CacheSink() = default;
    virtual std::size_t submit(const ResponseId& rid, CacheSubmit entry) = 0;
};

/// Writes straight into a store, stamped with the supplied clock.
class StoreSink final : public CacheSink
{
  public:
    StoreSink(ToolCacheStore& store, std::function<sim::Seconds()> clock)
        : _store(store), _clock(std::move(clock))
    {
    }
    std::size_t submit(const ResponseId& rid, CacheSubmit entry) override;

  private:
    ToolCacheStore& _store;
    std::function<sim::Seconds()> _clock;
};

/// Hands entries to an engine running under a wall-clock adapter; the call
/// returns once the engine thread has stored them.
class LiveEngineSink final : public CacheSink
{
  public:
    LiveEngineSink(sim::WallClockAdapter& adapter, Engine& engine): _adapter(adapter), _engine(engine) {}
    std::size_t submit(const ResponseId& rid, CacheSubmit entry) override;

  private:
    sim::WallClockAdapter& _adapter;
    Engine& _engine;
};

/// Full request handling minus the transport: size limit, parsing, storing
/// and the exact response body.
[[nodiscard]] ServiceResponse post_cache_tool_output(const ResponseId& rid, std::string_view body, CacheSink& sink,
                                                     const CacheServiceConfig& config = {});

} // namespace spectool
