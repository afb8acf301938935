// SPDX-License-Identifier: Apache-2.0
#pragma once

// Agent-side loops. Baseline calls the main model and runs each tool after
// the call comes back. Client speculation races a cheaper model against the
// main call and pre-runs the predicted tools. Engine mode additionally hands
// the pre-computed outputs to the engine so it can skip the round trip.

#include <spectool/core.hpp>
#include <spectool/endpoint.hpp>
#include <spectool/mock_lm.hpp>
#include <spectool/sim.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace spectool
{

enum class Mode : std::uint8_t
{
    Baseline,
    ClientSpec,
    EngineSpec,
};

[[nodiscard]] const char* to_string(Mode mode) noexcept;
[[nodiscard]] Mode parse_mode(std::string_view text); // throws ConfigError

struct TurnOutcome
{
    std::size_t task = 0;
    std::size_t turnIndex = 0;
    bool toolCall = false;
    bool speculated = false;
    bool hit = false;      // main call served from speculation
    bool ingested = false; // engine consumed the output without a round trip
    sim::Seconds startedAt = 0;
    sim::Seconds mainDoneAt = 0;
    std::optional<sim::Seconds> specDoneAt;
    std::optional<sim::Seconds> toolDoneAt;
    sim::Seconds turnDoneAt = 0;
    std::size_t tokensEmitted = 0;
};

struct Usage
{
    std::size_t mainCalls = 0;
    std::size_t mainInput = 0;
    std::size_t mainOutput = 0;
    std::size_t specCalls = 0;
    std::size_t specInput = 0;
    std::size_t specOutput = 0;
};

struct TaskSpec
{
    std::shared_ptr<const GenerationScript> script;
    std::uint64_t taskId = 0; // feeds the seed derivation
    std::string session;
};

struct TaskResult
{
    std::uint64_t taskId = 0;
    std::string session;
    Transcript transcript;
    std::vector<TurnOutcome> turns;
    sim::Seconds startedAt = 0;
    sim::Seconds toolPhaseEnd = 0; // last tool turn done (equals start when no tools ran)
    sim::Seconds finishedAt = 0;   // final answer received
    std::size_t tokens = 0;
    Usage usage;

    [[nodiscard]] sim::Seconds toolPhase() const noexcept { return toolPhaseEnd - startedAt; }
    [[nodiscard]] sim::Seconds total() const noexcept { return finishedAt - startedAt; }
};

struct AgentConfig
{
    std::size_t agent = 0;
    Mode mode = Mode::Baseline;
    SpecModelConfig spec;
    double specOverhead = 0; // hop charged per speculative call
    std::uint64_t seed = 0;
    std::shared_ptr<const Toolset> toolset; // when set, only speculatable tools are pre-run
};

/// Runs a queue of tasks back to back on the kernel.
class Agent
{
  public:
    Agent(sim::Kernel& kernel, AgentConfig config, MainEndpoint& endpoint, ToolRuntime& tools,
          std::vector<TaskSpec> tasks);
    Agent(const Agent&) = delete;
    Agent& operator=(const Agent&) = delete;

    /// Schedules the first task at the current time.
    void start();

    [[nodiscard]] bool done() const noexcept { return _results.size() == _tasks.size(); }
    [[nodiscard]] const std::vector<TaskResult>& results() const noexcept { return _results; }
    [[nodiscard]] const AgentConfig& config() const noexcept { return _config; }

  private:
    struct Pending
    {
        bool done = false;
        std::string output;
        sim::Seconds doneAt = 0;
    };

    struct Current
    {
        std::size_t index = 0;
        std::size_t turn = 0;
        std::size_t history = 0;
        ResponseId rid;
        std::uint64_t epoch = 0; // bumps every turn; stale events compare against it
        std::map<CanonicalKey, Pending> pending;
        std::optional<CanonicalKey> awaiting;
        std::optional<ToolCall> awaitingCall;
        TaskResult result;
    };

    const TaskSpec& task() const { return _tasks.at(_cur.index); }
    const ScriptTurn& scripted(std::size_t turn) const { return task().script->turns.at(turn); }
    TurnOutcome& outcome();
    std::uint64_t tool_seed(const CanonicalKey& key) const;

    void begin_task(std::size_t index);
    void dispatch_turn();
    void open_turn();
    void speculate();
    void on_sample(std::uint64_t epoch, SpecSample sample);
    void on_tool_done(std::uint64_t epoch, CanonicalKey key, ToolCall call, std::string output, bool speculative);
    void on_reply(MainReply reply);
    void on_ingest(Ingestion note);
    void finish_tool_turn(const ToolCall& call, const std::string& output);

    sim::Kernel& _kernel;
    AgentConfig _config;
    MainEndpoint& _endpoint;
    ToolRuntime& _tools;
    std::vector<TaskSpec> _tasks;
    std::vector<TaskResult> _results;
    Current _cur;
    std::size_t _speculatedTurns = 0;
};

/// Runs one task for one agent on a fresh kernel-driven loop and returns it.
[[nodiscard]] TaskResult run_task(sim::Kernel& kernel, AgentConfig config, MainEndpoint& endpoint,
                                  ToolRuntime& tools, TaskSpec task);

/// JSON lines, one object per turn outcome.
void write_outcomes(std::ostream& out, std::span<const TaskResult> results);

} // namespace spectool
