// SPDX-License-Identifier: Apache-2.0
#pragma once

// Closed-form performance model for client-side and engine-side speculative
// tool calling. These functions are the oracle the simulators are checked
// against, so they never touch simulator code.

#include <spectool/error.hpp>

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace spectool::analytic
{

/// Agent repeatedly calling the API and receiving a tool call each time.
struct ClientScenario
{
    double mainLatency = 1.0;  // seconds per main-model generation
    double specLatency = 0.5;  // seconds per speculative-model generation
    double toolLatency = 1.0;  // seconds per tool execution
    double acceptance = 0.0;   // probability the speculated call is right
    std::size_t requests = 1;  // consecutive tool-calling requests

    void validate() const; // throws InvalidScenario
};

/// Time for all requests without speculation.
[[nodiscard]] double standard_time(const ClientScenario& s);

/// Expected time with speculation: a hit waits for max{main, spec + tool},
/// a miss pays main + tool.
[[nodiscard]] double speculative_time(const ClientScenario& s);

/// Speculative time for a realized per-request hit vector; hits.size() is N.
[[nodiscard]] double speculative_time_realized(const ClientScenario& s, std::span<const bool> hits);

[[nodiscard]] double client_speedup(const ClientScenario& s);

struct SpeedupBound
{
    double maximum; // speedup at acceptance 1
    double cap;     // 2 - 2g/(G+g+T), strictly below 2
};

/// Requires specLatency < mainLatency; throws LemmaHypothesisViolated otherwise.
[[nodiscard]] SpeedupBound speedup_bound(const ClientScenario& s);

struct TurnProfile
{
    double reasoningTokens = 0; // R: decoded before the call
    double callTokens = 1;      // t: tool-call tokens decoded
    double outputTokens = 0;    // t_o: tool-output tokens
    double toolSeconds = 0;     // T: tool duration
};

struct EngineScenario
{
    double overhead = 0;     // o: per-hop API and eviction overhead
    double prefillRate = 0;  // phi: seconds per prefilled token
    double decodeRate = 0;   // delta: seconds per decoded token
    double promptTokens = 0; // X1
    std::vector<TurnProfile> turns;
    double acceptance = 0;

    [[nodiscard]] std::size_t turnCount() const noexcept { return turns.size(); }
    void validate() const; // throws InvalidScenario
};

/// Prompt length entering each turn: X_1 .. X_{K+1}.
[[nodiscard]] std::vector<double> prompt_lengths(const EngineScenario& s);

/// Evict-then-refill without prefix caching: every turn re-prefills its full
/// prompt.
[[nodiscard]] double vanilla_time(const EngineScenario& s);

/// Evict-then-refill with a perfect prefix cache.
[[nodiscard]] double prefix_cached_time(const EngineScenario& s);

/// Tool-cache engine, expected over the acceptance rate.
[[nodiscard]] double tool_cache_time(const EngineScenario& s);

/// Tool-cache engine for a realized per-turn hit vector.
[[nodiscard]] double tool_cache_time_realized(const EngineScenario& s, std::span<const bool> hits);

/// Saving of the tool-cache engine over prefix caching at acceptance 1:
/// 2Ko + delta*(sum t - K) + sum T.
[[nodiscard]] double full_acceptance_saving(const EngineScenario& s);

struct Range
{
    double start = 0;
    double stop = 0;
    double step = 1;

    /// Parses `start:stop:step`; throws ConfigError on malformed input.
    static Range parse(const std::string& text);
    /// Inclusive grid; empty when stop < start.
    [[nodiscard]] std::vector<double> values() const;
};

struct SweepGrid
{
    std::vector<double> acceptance;
    std::vector<double> specRatio; // g / G
    std::vector<double> toolLatency;
    double mainLatency = 1.0;
};

struct SweepRow
{
    double acceptance;
    double specRatio;
    double toolLatency;
    double speedup;
};

/// Evaluates the client speedup over the Cartesian grid (acceptance outermost,
/// then g/G, then T). Throws EmptyGrid when any axis is empty.
[[nodiscard]] std::vector<SweepRow> sweep_client(const SweepGrid& grid);

/// CSV with header `alpha,g_over_G,T,speedup`.
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

} // namespace spectool::analytic
