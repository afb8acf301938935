// SPDX-License-Identifier: Apache-2.0
#pragma once

// What the client talks to when it calls the main model: either a mock with a
// fixed (or per-token) latency, or the engine simulator.

#include <spectool/engine.hpp>
#include <spectool/mock_lm.hpp>
#include <spectool/sim.hpp>
#include <spectool/tool_cache.hpp>

#include <functional>
#include <memory>
#include <string>

namespace spectool
{

struct MainCall
{
    std::shared_ptr<const GenerationScript> script;
    std::size_t turn = 0;
    std::size_t historyTokens = 0;
    std::string session;
};

struct MainReply
{
    ResponseId rid;
    std::size_t turn = 0;
    TokenList tokens;
};

struct MainHandlers
{
    std::function<void(MainReply)> onReply;
    std::function<void(Ingestion)> onIngest; // only engines with a tool cache call this
};

class MainEndpoint
{
  public:
    virtual ~MainEndpoint() = default;

    /// Dispatches now; returns the response id immediately.
    virtual ResponseId call(MainCall call, MainHandlers handlers) = 0;

    [[nodiscard]] virtual bool accepts_tool_cache() const noexcept { return false; }

    /// Throws ConfigError unless accepts_tool_cache().
    virtual void submit_tool_cache(const ResponseId& rid, CacheSubmit entry);
};

/// Replies one overhead hop plus the scripted generation latency after the
/// call. Per-token scripts re-prefill the whole history every call.
class FixedLatencyEndpoint final : public MainEndpoint
{
  public:
    FixedLatencyEndpoint(sim::Kernel& kernel, double overhead);

    ResponseId call(MainCall call, MainHandlers handlers) override;

  private:
    sim::Kernel& _kernel;
    double _overhead;
    std::uint64_t _nextId = 1;
};

class EngineEndpoint final : public MainEndpoint
{
  public:
    explicit EngineEndpoint(Engine& engine): _engine(engine) {}

    ResponseId call(MainCall call, MainHandlers handlers) override;
    [[nodiscard]] bool accepts_tool_cache() const noexcept override { return _engine.config().toolCache; }
    void submit_tool_cache(const ResponseId& rid, CacheSubmit entry) override;

  private:
    Engine& _engine;
};

} // namespace spectool
