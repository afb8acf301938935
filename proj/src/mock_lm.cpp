// SPDX-License-Identifier: Apache-2.0
#include <spectool/mock_lm.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <map>

namespace spectool
{

namespace
{

std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

bool finite_non_negative(double v) noexcept
{
    return std::isfinite(v) && v >= 0;
}

} // namespace

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) noexcept
{
    auto state = splitmix64(base);
    for (auto part: parts)
        state = splitmix64(state ^ splitmix64(part));
    return state;
}

TokenList filler_tokens(std::size_t count, std::size_t salt)
{
    TokenList tokens;
    tokens.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        tokens.push_back(Token::textToken(fmt::format("r{:03d}", (i + salt) % 1000)));
    return tokens;
}

ScriptTurn make_tool_turn(std::size_t reasoningTokens, ToolCall call)
{
    ScriptTurn turn;
    turn.tokens = filler_tokens(reasoningTokens);
    turn.reasoningTokens = reasoningTokens;
    auto span = render(call);
    turn.tokens.insert(turn.tokens.end(), span.begin(), span.end());
    turn.call = std::move(call);
    return turn;
}

ScriptTurn make_final_turn(std::size_t textTokens)
{
    ScriptTurn turn;
    turn.tokens = filler_tokens(textTokens, 500);
    turn.reasoningTokens = textTokens;
    turn.tokens.push_back(Token::eos());
    return turn;
}

ToolCall call_with_token_count(std::string name, std::string key, std::size_t callTokens)
{
    // Payload tail is ` {"key":"<pad>"}`: 8 + |key| + |pad| bytes in 4-byte chunks.
    auto const fixed = 8 + key.size();
    if (callTokens < 3 || 4 * (callTokens - 3) < fixed)
        throw Error(Errc::ConfigError, fmt::format("a call with key '{}' needs more than {} tokens", key, callTokens));
    auto const pad = 4 * (callTokens - 3) - fixed;
    ToolCall call { std::move(name), {} };
    call.args.emplace_back(std::move(key), std::string(pad, 'a'));
    return call;
}

std::string output_with_token_count(std::size_t tokens, std::string_view seed)
{
    std::string out;
    out.reserve(tokens * kBytesPerToken);
    while (out.size() < tokens * kBytesPerToken)
        out += seed.empty() ? std::string_view("x") : seed;
    out.resize(tokens * kBytesPerToken);
    return out;
}

void GenerationScript::validate() const
{
    if (turns.empty())
        throw Error(Errc::ConfigError, "a script needs at least one turn");
    if (fixedLatency)
    {
        if (!finite_non_negative(*fixedLatency))
            throw Error(Errc::ConfigError, "fixed latency must be non-negative");
    }
    else if (!(prefillRate > 0 && decodeRate > 0 && std::isfinite(prefillRate) && std::isfinite(decodeRate)))
    {
        throw Error(Errc::ConfigError, "prefill and decode rates must be positive without a fixed latency");
    }
    for (std::size_t i = 0; i < turns.size(); ++i)
    {
        auto const& turn = turns[i];
        if (!well_formed(turn.tokens))
            throw Error(Errc::ConfigError, fmt::format("turn {} is not a well-formed token stream", i));
        bool const last = i + 1 == turns.size();
        if (turn.final() != last)
            throw Error(Errc::ConfigError, fmt::format("turn {}: only the last turn may end without a tool call", i));
        if (turn.call && extract_tool_call(turn.tokens) != *turn.call)
            throw Error(Errc::ConfigError, fmt::format("turn {}: emitted call differs from the scripted call", i));
    }
}

std::size_t GenerationScript::toolTurns() const noexcept
{
    std::size_t n = 0;
    for (auto const& turn: turns)
        n += turn.call ? 1 : 0;
    return n;
}

Generation main_generate(const GenerationScript& script, std::size_t turn, std::size_t prefillTokens)
{
    if (turn >= script.turns.size())
        throw Error(Errc::ScriptExhausted, fmt::format("turn {} requested from a {}-turn script", turn,
                                                       script.turns.size()));
    auto const& tokens = script.turns[turn].tokens;
    double latency = script.fixedLatency
                       ? *script.fixedLatency
                       : script.prefillRate * static_cast<double>(prefillTokens)
                             + script.decodeRate * static_cast<double>(tokens.size());
    return Generation { tokens, latency };
}

void main_generate_async(sim::Kernel& kernel, const GenerationScript& script, std::size_t turn,
                         std::size_t prefillTokens, std::function<void(Generation)> done)
{
    auto generation = main_generate(script, turn, prefillTokens);
    auto const latency = generation.latency;
    kernel.schedule(latency, fmt::format("main.generate turn={}", turn),
                    [done = std::move(done), generation = std::move(generation)]() mutable {
                        done(std::move(generation));
                    });
}

void SpecModelConfig::validate() const
{
    if (!finite_non_negative(latency))
        throw Error(Errc::ConfigError, "speculative latency must be non-negative");
    if (!(accuracy >= 0 && accuracy <= 1))
        throw Error(Errc::ConfigError, fmt::format("speculative accuracy {} outside [0, 1]", accuracy));
    if (samples < 1)
        throw Error(Errc::ConfigError, "at least one speculative sample is required");
}

ToolCall perturb(const ToolCall& intended)
{
    static const std::string kSentinel = "__spec_miss__";
    ToolCall wrong = intended;
    if (wrong.args.empty())
    {
        wrong.args.emplace_back("__spec", std::string("__miss__"));
        return wrong;
    }
    auto& value = wrong.args.front().second;
    auto const* text = std::get_if<std::string>(&value);
    value = (text && *text == kSentinel) ? std::string("__spec_miss_2__") : kSentinel;
    return wrong;
}

std::vector<SpecSample> speculate(const SpecModelConfig& config, const ToolCall& intended, std::uint64_t seed,
                                  sim::Seconds now, std::optional<bool> forced)
{
    config.validate();
    std::vector<SpecSample> samples;
    samples.reserve(config.samples);
    for (std::size_t i = 0; i < config.samples; ++i)
    {
        bool correct = false;
        if (forced)
        {
            correct = *forced;
        }
        else
        {
            std::mt19937_64 rng(derive_seed(seed, { i }));
            correct = std::bernoulli_distribution(config.accuracy)(rng);
        }
        samples.push_back(SpecSample { correct ? intended : perturb(intended), correct, now + config.latency });
    }
    return samples;
}

double LatencyDistribution::sample(std::uint64_t seed) const
{
    if (stddev <= 0)
        return std::max(0.0, mean);
    std::mt19937_64 rng(seed);
    return std::max(0.0, std::normal_distribution<double>(mean, stddev)(rng));
}

ToolRuntime::ToolRuntime(LatencyDistribution latency, FixtureMap fixtures, std::optional<std::string> fallback)
    : _latency(latency), _fixtures(std::move(fixtures)), _fallback(std::move(fallback))
{
}

const std::string& ToolRuntime::output(const ToolCall& call) const
{
    auto const it = _fixtures.find(canonical_key(call));
    if (it != _fixtures.end())
        return it->second;
    if (_fallback)
        return *_fallback;
    throw Error(Errc::UnknownTool, fmt::format("no fixture for {}", render_payload(call)));
}

ToolResult ToolRuntime::run(const ToolCall& call, std::uint64_t seed)
{
    ToolResult result { output(call), duration(seed) };
    _log.push_back(canonical_key(call));
    return result;
}

FixtureMap load_fixtures(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::ConfigError, fmt::format("cannot open fixtures '{}'", path.string()));
    nlohmann::json doc;
    try
    {
        doc = nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw Error(Errc::ConfigError, fmt::format("fixtures '{}': {}", path.string(), e.what()));
    }
    if (!doc.is_object())
        throw Error(Errc::ConfigError, fmt::format("fixtures '{}' must be a JSON object", path.string()));
    FixtureMap fixtures;
    for (auto const& [hex, value]: doc.items())
    {
        if (!value.is_string())
            throw Error(Errc::ConfigError, fmt::format("fixture {} is not a string", hex));
        fixtures.emplace(CanonicalKey::fromHex(hex), value.get<std::string>());
    }
    return fixtures;
}

void save_fixtures(const std::filesystem::path& path, const FixtureMap& fixtures)
{
    // std::map keeps the file stable across runs.
    std::map<std::string, std::string> sorted;
    for (auto const& [key, output]: fixtures)
        sorted.emplace(key.hex(), output);
    std::ofstream out(path);
    if (!out)
        throw Error(Errc::ConfigError, fmt::format("cannot write fixtures '{}'", path.string()));
    out << nlohmann::json(sorted).dump(2) << '\n';
}

} // namespace spectool
