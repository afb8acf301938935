// SPDX-License-Identifier: Apache-2.0
#pragma once

// Discrete-event model of an inference engine serving tool-calling agents.
// Without the tool cache a sequence that emits a tool call is evicted and the
// client must send a follow-up request. With the tool cache the engine drafts
// the call from submitted speculation, validates it in one pass, and ingests
// the submitted output without leaving the batch.

#include <spectool/core.hpp>
#include <spectool/mock_lm.hpp>
#include <spectool/sim.hpp>
#include <spectool/tool_cache.hpp>

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace spectool
{

enum class VerifyCost : std::uint8_t
{
    SinglePass, // one decode step per validated draft
    PerToken,   // one decode step per draft token
};

struct EngineConfig
{
    std::size_t batchSize = 256;
    double prefillRate = 0.001; // seconds per prefilled token
    double decodeRate = 0.02;   // seconds per decoded token
    double overhead = 0.05;     // seconds per client <-> engine hop
    bool prefixCache = false;
    bool toolCache = false;
    VerifyCost verifyCost = VerifyCost::SinglePass;

    void validate() const; // throws ConfigError
};

struct DraftValidation
{
    std::size_t accepted = 0;  // longest common prefix with the scripted tokens
    std::optional<Token> next; // scripted token after the accepted prefix
};

[[nodiscard]] DraftValidation validate_draft(std::span<const Token> draft, std::span<const Token> scripted);

enum class SeqStatus : std::uint8_t
{
    New,
    Decode,
    WaitingTool, // evicted after emitting a tool call
    Done,
};

[[nodiscard]] const char* to_string(SeqStatus status) noexcept;

struct SequenceInfo
{
    ResponseId rid;
    std::string session;
    SeqStatus status = SeqStatus::New;
    std::size_t cachedPrefix = 0; // reused from the prefix cache
    std::size_t prefilled = 0;
    std::size_t decoded = 0;      // includes validated draft tokens
    std::size_t injected = 0;     // ingested tool blocks
    std::size_t kvTokens = 0;
    std::size_t evictions = 0;
    std::size_t validations = 0;
    std::size_t ingests = 0;
    TokenList emitted;
};

struct EngineRequest
{
    std::shared_ptr<const GenerationScript> script;
    std::size_t turn = 0;          // scripted turn this request starts at
    std::size_t historyTokens = 0; // prompt length
    std::string session;           // one conversation; shares the prefix cache
};

struct Emission
{
    ResponseId rid;
    std::size_t turn = 0;
    TokenList tokens;
    sim::Seconds emittedAt = 0; // engine time; the client sees it one hop later
};

struct Ingestion
{
    ResponseId rid;
    std::size_t turn = 0;
    TokenList tokens;
    ToolCall call;
    std::string output;
    sim::Seconds lookupAt = 0;
    sim::Seconds residentAt = 0;
};

struct EngineEvents
{
    std::function<void(Emission)> onEmit;
    std::function<void(Ingestion)> onIngest;
};

/// Per-conversation timing marks, one pair per tool turn.
struct TurnMarks
{
    std::optional<sim::Seconds> resultArrived;  // follow-up reached the engine, or cache lookup hit
    std::optional<sim::Seconds> resultResident; // follow-up prefilled, or output ingested
    bool ingested = false;
};

struct SessionMarks
{
    std::optional<sim::Seconds> start; // first request reached the engine
    std::vector<TurnMarks> turns;

    /// Seconds from start to the last tool turn's result arriving / becoming
    /// resident. Throws SimulationError while a mark is missing.
    [[nodiscard]] sim::Seconds arrived_window() const;
    [[nodiscard]] sim::Seconds resident_window() const;
};

class Engine
{
  public:
    Engine(sim::Kernel& kernel, EngineConfig config);
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    /// Assigns a response id now; the request reaches the engine one hop later.
    ResponseId submit_request(EngineRequest request, EngineEvents events);

    /// Client-side submission: becomes visible one hop later. Returns the
    /// accepted count (always 1).
    std::size_t submit_tool_cache(const ResponseId& rid, CacheSubmit entry);

    /// Stores immediately, at the current engine step. Submissions for
    /// finished responses are accepted and dropped.
    std::size_t accept_submission(const ResponseId& rid, CacheSubmit entry);

    [[nodiscard]] const SequenceInfo* sequence(const ResponseId& rid) const;
    [[nodiscard]] const SessionMarks* marks(const std::string& session) const;
    [[nodiscard]] const ToolCacheStore& store() const noexcept { return _store; }
    [[nodiscard]] const EngineConfig& config() const noexcept { return _config; }
    [[nodiscard]] std::size_t resident() const noexcept { return _resident; }
    [[nodiscard]] std::size_t queued() const noexcept { return _queue.size(); }
    [[nodiscard]] sim::Kernel& kernel() noexcept { return _kernel; }

    /// Event log: `t=<s> rid=<id> phase=<phase> tokens=<n>` per chunk.
    void set_log(std::ostream* log) noexcept { _log = log; }

  private:
    struct Sequence
    {
        SequenceInfo info;
        EngineRequest request;
        EngineEvents events;
        std::size_t turn = 0;
        std::size_t history = 0;
    };

    struct Session
    {
        std::size_t retained = 0;
        SessionMarks marks;
    };

    Sequence& seq(const ResponseId& rid);
    TurnMarks& mark(const std::string& session, std::size_t turn);
    void log(const Sequence& s, const char* phase, std::size_t tokens);
    void after(sim::Seconds delay, const ResponseId& rid, const char* what, std::function<void(Sequence&)> next);

    void arrive(const ResponseId& rid);
    void admit(const ResponseId& rid);
    void release();
    void start_turn(Sequence& s);
    void at_tool_start(Sequence& s);
    void decode_call_rest(Sequence& s, std::size_t remaining);
    void at_tool_end(Sequence& s);
    void emit_and_evict(Sequence& s);
    void finish(Sequence& s);

    sim::Kernel& _kernel;
    EngineConfig _config;
    ToolCacheStore _store;
    std::map<ResponseId, Sequence> _sequences;
    std::map<std::string, Session> _sessions;
    std::deque<ResponseId> _queue;
    std::size_t _resident = 0;
    std::uint64_t _nextId = 1;
    std::ostream* _log = nullptr;
};

} // namespace spectool
