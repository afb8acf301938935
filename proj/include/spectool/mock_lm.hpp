// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scripted stand-ins for the main model, the speculative model and black-box
// tools. Every random draw is derived from an explicit seed so that paired
// runs (baseline vs speculative) see identical latencies and coin flips.

#include <spectool/core.hpp>
#include <spectool/sim.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace spectool
{

/// SplitMix64-chained seed derivation; independent of event order.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) noexcept;

struct ScriptTurn
{
    TokenList tokens;
    std::size_t reasoningTokens = 0; // TEXT tokens before the call span (or before EOS)
    std::optional<ToolCall> call;    // ground truth for speculation; absent on the final turn

    [[nodiscard]] bool final() const noexcept { return !call.has_value(); }
    [[nodiscard]] std::size_t callTokens() const noexcept { return tokens.size() - reasoningTokens; }
    [[nodiscard]] std::span<const Token> callSpan() const noexcept
    {
        return std::span(tokens).subspan(reasoningTokens);
    }
};

/// `count` TEXT tokens of filler reasoning, kBytesPerToken bytes each.
[[nodiscard]] TokenList filler_tokens(std::size_t count, std::size_t salt = 0);

[[nodiscard]] ScriptTurn make_tool_turn(std::size_t reasoningTokens, ToolCall call);
[[nodiscard]] ScriptTurn make_final_turn(std::size_t textTokens);

/// Builds `name {"<key>":"aaa..."}` padded so render() yields exactly
/// `callTokens` tokens. Needs callTokens >= 5.
[[nodiscard]] ToolCall call_with_token_count(std::string name, std::string key, std::size_t callTokens);

/// Deterministic tool output of exactly `tokens` toy tokens.
[[nodiscard]] std::string output_with_token_count(std::size_t tokens, std::string_view seed = "out");

struct GenerationScript
{
    std::size_t promptTokens = 0; // X1
    std::vector<ScriptTurn> turns;
    double prefillRate = 0;       // seconds per prefilled token
    double decodeRate = 0;        // seconds per decoded token
    std::optional<double> fixedLatency;

    void validate() const; // throws ConfigError
    [[nodiscard]] std::size_t toolTurns() const noexcept;
};

struct Generation
{
    TokenList tokens;
    sim::Seconds latency = 0;
};

/// Main model output for `turn`. Latency is the fixed override when set,
/// otherwise prefill of `prefillTokens` plus one decode step per emitted token.
/// Throws ScriptExhausted past the final turn.
[[nodiscard]] Generation main_generate(const GenerationScript& script, std::size_t turn, std::size_t prefillTokens);

/// Schedules `done` on the kernel once the generation completes.
void main_generate_async(sim::Kernel& kernel, const GenerationScript& script, std::size_t turn,
                         std::size_t prefillTokens, std::function<void(Generation)> done);

struct SpecModelConfig
{
    double latency = 0.5;      // g
    double accuracy = 0.0;     // alpha, per sample
    std::size_t samples = 1;   // lambda
    /// When non-empty, replaces the coin flips: entry k % size decides
    /// whether every sample of the agent's k-th speculated turn is correct.
    std::vector<bool> forcedHits;

    void validate() const; // throws ConfigError
};

struct SpecSample
{
    ToolCall call;
    bool correct = false;
    sim::Seconds completesAt = 0;
};

/// Flips the first argument to a sentinel (or adds one) so the canonical key
/// can never collide with the original.
[[nodiscard]] ToolCall perturb(const ToolCall& intended);

/// Draws `samples` independent predictions of `intended`.
[[nodiscard]] std::vector<SpecSample> speculate(const SpecModelConfig& config, const ToolCall& intended,
                                                std::uint64_t seed, sim::Seconds now = 0,
                                                std::optional<bool> forced = std::nullopt);

struct LatencyDistribution
{
    double mean = 0;
    double stddev = 0;

    /// Normal sample truncated at zero (negative draws become 0).
    [[nodiscard]] double sample(std::uint64_t seed) const;
};

using FixtureMap = std::unordered_map<CanonicalKey, std::string, CanonicalKeyHash>;

struct ToolResult
{
    std::string output;
    double duration = 0;
};

class ToolRuntime
{
  public:
    ToolRuntime(LatencyDistribution latency, FixtureMap fixtures, std::optional<std::string> fallback = std::nullopt);

    /// Output for the call's key; falls back when configured, else UnknownTool.
    [[nodiscard]] const std::string& output(const ToolCall& call) const;
    [[nodiscard]] double duration(std::uint64_t seed) const { return _latency.sample(seed); }

    /// Executes the call and records it in the call log.
    ToolResult run(const ToolCall& call, std::uint64_t seed);

    [[nodiscard]] std::span<const CanonicalKey> call_log() const noexcept { return _log; }
    [[nodiscard]] const LatencyDistribution& latency() const noexcept { return _latency; }
    void set_latency(LatencyDistribution latency) noexcept { _latency = latency; }
    [[nodiscard]] const FixtureMap& fixtures() const noexcept { return _fixtures; }

  private:
    LatencyDistribution _latency;
    FixtureMap _fixtures;
    std::optional<std::string> _fallback;
    std::vector<CanonicalKey> _log;
};

/// Fixture file: JSON object mapping canonical-key hex to output string.
[[nodiscard]] FixtureMap load_fixtures(const std::filesystem::path& path);
void save_fixtures(const std::filesystem::path& path, const FixtureMap& fixtures);

} // namespace spectool
