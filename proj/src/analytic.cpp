// SPDX-License-Identifier: Apache-2.0
#include <spectool/analytic.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <ostream>

namespace spectool::analytic
{

namespace
{

bool positive(double v) noexcept
{
    return std::isfinite(v) && v > 0;
}

bool non_negative(double v) noexcept
{
    return std::isfinite(v) && v >= 0;
}

bool probability(double v) noexcept
{
    return std::isfinite(v) && v >= 0 && v <= 1;
}

double per_turn_time(const EngineScenario& s, std::size_t i, double hit)
{
    auto const& turn = s.turns[i];
    auto const miss = 1.0 - hit;
    return miss * 2.0 * s.overhead
         + s.decodeRate * (hit + turn.reasoningTokens + miss * turn.callTokens)
         + miss * turn.toolSeconds;
}

double total_new_prefill(const EngineScenario& s)
{
    double tokens = s.promptTokens;
    for (auto const& turn: s.turns)
        tokens += turn.callTokens + turn.outputTokens;
    return tokens;
}

} // namespace

void ClientScenario::validate() const
{
    if (!positive(mainLatency) || !positive(specLatency) || !positive(toolLatency))
        throw Error(Errc::InvalidScenario, "G, g and T must be positive");
    if (!probability(acceptance))
        throw Error(Errc::InvalidScenario, fmt::format("acceptance {} outside [0, 1]", acceptance));
    if (requests < 1)
        throw Error(Errc::InvalidScenario, "N must be at least 1");
}

double standard_time(const ClientScenario& s)
{
    s.validate();
    return static_cast<double>(s.requests) * (s.mainLatency + s.toolLatency);
}

double speculative_time(const ClientScenario& s)
{
    s.validate();
    auto const n = static_cast<double>(s.requests);
    auto const hitBranch = std::max(s.mainLatency, s.specLatency + s.toolLatency);
    auto const missBranch = s.mainLatency + s.toolLatency;
    return s.acceptance * n * hitBranch + (1.0 - s.acceptance) * n * missBranch;
}

double speculative_time_realized(const ClientScenario& s, std::span<const bool> hits)
{
    s.validate();
    auto const hitBranch = std::max(s.mainLatency, s.specLatency + s.toolLatency);
    auto const missBranch = s.mainLatency + s.toolLatency;
    double total = 0;
    for (bool hit: hits)
        total += hit ? hitBranch : missBranch;
    return total;
}

double client_speedup(const ClientScenario& s)
{
    // N cancels; evaluate the per-request form so alpha = 0 gives exactly 1.
    s.validate();
    auto const full = s.mainLatency + s.toolLatency;
    auto const overlapped = std::max(s.mainLatency, s.specLatency + s.toolLatency);
    return full / (s.acceptance * overlapped + (1.0 - s.acceptance) * full);
}

SpeedupBound speedup_bound(const ClientScenario& s)
{
    s.validate();
    if (!(s.specLatency < s.mainLatency))
        throw Error(Errc::LemmaHypothesisViolated,
                    fmt::format("speculative latency {} must be below main latency {}", s.specLatency, s.mainLatency));
    auto const full = s.mainLatency + s.toolLatency;
    return SpeedupBound {
        .maximum = full / std::max(s.mainLatency, s.specLatency + s.toolLatency),
        .cap = 2.0 - 2.0 * s.specLatency / (s.mainLatency + s.specLatency + s.toolLatency),
    };
}

void EngineScenario::validate() const
{
    if (turns.empty())
        throw Error(Errc::InvalidScenario, "at least one turn is required");
    if (!non_negative(overhead))
        throw Error(Errc::InvalidScenario, "overhead must be non-negative");
    if (!non_negative(prefillRate) || !non_negative(decodeRate))
        throw Error(Errc::InvalidScenario, "prefill and decode rates must be non-negative");
    if (!non_negative(promptTokens))
        throw Error(Errc::InvalidScenario, "prompt tokens must be non-negative");
    if (!probability(acceptance))
        throw Error(Errc::InvalidScenario, fmt::format("acceptance {} outside [0, 1]", acceptance));
    for (auto const& turn: turns)
    {
        if (!non_negative(turn.reasoningTokens) || !non_negative(turn.outputTokens) || !non_negative(turn.toolSeconds))
            throw Error(Errc::InvalidScenario, "turn quantities must be non-negative");
        if (!(std::isfinite(turn.callTokens) && turn.callTokens >= 1))
            throw Error(Errc::InvalidScenario, "each turn decodes at least one tool-call token");
    }
}

std::vector<double> prompt_lengths(const EngineScenario& s)
{
    s.validate();
    std::vector<double> lengths { s.promptTokens };
    lengths.reserve(s.turns.size() + 1);
    for (auto const& turn: s.turns)
        lengths.push_back(lengths.back() + turn.callTokens + turn.outputTokens);
    return lengths;
}

double vanilla_time(const EngineScenario& s)
{
    auto const lengths = prompt_lengths(s);
    auto const k = static_cast<double>(s.turns.size());
    double prefill = 0;
    double decode = 0;
    double tools = 0;
    for (std::size_t i = 0; i < s.turns.size(); ++i)
    {
        prefill += lengths[i];
        decode += s.turns[i].reasoningTokens + s.turns[i].callTokens;
        tools += s.turns[i].toolSeconds;
    }
    return 2.0 * k * s.overhead + s.prefillRate * prefill + s.decodeRate * decode + tools;
}

double prefix_cached_time(const EngineScenario& s)
{
    s.validate();
    auto const k = static_cast<double>(s.turns.size());
    double decode = 0;
    double tools = 0;
    for (auto const& turn: s.turns)
    {
        decode += turn.reasoningTokens + turn.callTokens;
        tools += turn.toolSeconds;
    }
    return 2.0 * k * s.overhead + s.prefillRate * total_new_prefill(s) + s.decodeRate * decode + tools;
}

double tool_cache_time(const EngineScenario& s)
{
    s.validate();
    auto const k = static_cast<double>(s.turns.size());
    auto const a = s.acceptance;
    double reasoning = 0;
    double calls = 0;
    double tools = 0;
    for (auto const& turn: s.turns)
    {
        reasoning += turn.reasoningTokens;
        calls += turn.callTokens;
        tools += turn.toolSeconds;
    }
    return (1.0 - a) * 2.0 * k * s.overhead + s.prefillRate * total_new_prefill(s)
         + s.decodeRate * (a * k + reasoning + (1.0 - a) * calls) + (1.0 - a) * tools;
}

double tool_cache_time_realized(const EngineScenario& s, std::span<const bool> hits)
{
    s.validate();
    if (hits.size() != s.turns.size())
        throw Error(Errc::InvalidScenario,
                    fmt::format("hit vector has {} entries for {} turns", hits.size(), s.turns.size()));
    double total = s.prefillRate * total_new_prefill(s);
    for (std::size_t i = 0; i < s.turns.size(); ++i)
        total += per_turn_time(s, i, hits[i] ? 1.0 : 0.0);
    return total;
}

double full_acceptance_saving(const EngineScenario& s)
{
    s.validate();
    auto const k = static_cast<double>(s.turns.size());
    double calls = 0;
    double tools = 0;
    for (auto const& turn: s.turns)
    {
        calls += turn.callTokens;
        tools += turn.toolSeconds;
    }
    return 2.0 * k * s.overhead + s.decodeRate * (calls - k) + tools;
}

Range Range::parse(const std::string& text)
{
    std::vector<double> parts;
    std::size_t begin = 0;
    while (true)
    {
        auto const end = text.find(':', begin);
        auto const piece = text.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
        double value = 0;
        auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), value);
        if (piece.empty() || ec != std::errc {} || ptr != piece.data() + piece.size() || !std::isfinite(value))
            throw Error(Errc::ConfigError, fmt::format("malformed range '{}', expected start:stop:step", text));
        parts.push_back(value);
        if (end == std::string::npos)
            break;
        begin = end + 1;
    }
    if (parts.size() != 3)
        throw Error(Errc::ConfigError, fmt::format("malformed range '{}', expected start:stop:step", text));
    if (!(parts[2] > 0))
        throw Error(Errc::ConfigError, fmt::format("range '{}' needs a positive step", text));
    return Range { parts[0], parts[1], parts[2] };
}

std::vector<double> Range::values() const
{
    std::vector<double> out;
    if (stop < start)
        return out;
    // Tolerate representation error so 0:1:0.1 includes 1.
    auto const count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(std::min(stop, start + static_cast<double>(i) * step));
    return out;
}

std::vector<SweepRow> sweep_client(const SweepGrid& grid)
{
    if (grid.acceptance.empty() || grid.specRatio.empty() || grid.toolLatency.empty())
        throw Error(Errc::EmptyGrid, "sweep grid has an empty axis");
    std::vector<SweepRow> rows;
    rows.reserve(grid.acceptance.size() * grid.specRatio.size() * grid.toolLatency.size());
    for (double alpha: grid.acceptance)
        for (double ratio: grid.specRatio)
            for (double tool: grid.toolLatency)
            {
                ClientScenario const s {
                    .mainLatency = grid.mainLatency,
                    .specLatency = ratio * grid.mainLatency,
                    .toolLatency = tool,
                    .acceptance = alpha,
                    .requests = 1,
                };
                rows.push_back({ alpha, ratio, tool, client_speedup(s) });
            }
    return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows)
{
    out << "alpha,g_over_G,T,speedup\n";
    for (auto const& row: rows)
        out << fmt::format("{},{},{},{:.12g}\n", row.acceptance, row.specRatio, row.toolLatency, row.speedup);
}

} // namespace spectool::analytic
