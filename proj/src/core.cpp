// SPDX-License-Identifier: Apache-2.0
#include <spectool/core.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fmt/format.h>

namespace spectool
{

std::string_view to_string(Errc code) noexcept
{
    switch (code)
    {
        case Errc::InvalidCall: return "InvalidCall";
        case Errc::NoToolCall: return "NoToolCall";
        case Errc::MalformedToolCall: return "MalformedToolCall";
        case Errc::InvalidScenario: return "InvalidScenario";
        case Errc::LemmaHypothesisViolated: return "LemmaHypothesisViolated";
        case Errc::EmptyGrid: return "EmptyGrid";
        case Errc::InvalidDelay: return "InvalidDelay";
        case Errc::ScriptExhausted: return "ScriptExhausted";
        case Errc::UnknownTool: return "UnknownTool";
        case Errc::ConfigError: return "ConfigError";
        case Errc::InvalidBaseline: return "InvalidBaseline";
        case Errc::InvalidWindow: return "InvalidWindow";
        case Errc::SimulationError: return "SimulationError";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& message):
    std::runtime_error(fmt::format("{}: {}", to_string(code), message)), _code(code)
{
}

namespace
{

using ordered_json = nlohmann::ordered_json;

bool valid_tool_name(std::string_view name) noexcept
{
    if (name.empty())
        return false;
    return std::none_of(name.begin(), name.end(), [](char c) {
        auto const u = static_cast<unsigned char>(c);
        return u <= 0x20 || u == 0x7f || c == '{' || c == '}';
    });
}

std::string quote(const std::string& text, Errc onError)
{
    try
    {
        return nlohmann::json(text).dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw Error(onError, fmt::format("string is not valid UTF-8: {}", e.what()));
    }
}

std::string scalar_json(const Scalar& value)
{
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::nullptr_t>)
                return "null";
            else if constexpr (std::is_same_v<T, bool>)
                return v ? "true" : "false";
            else if constexpr (std::is_same_v<T, double>)
                return format_number(v);
            else
                return quote(v, Errc::InvalidCall);
        },
        value);
}

void check_call(const ToolCall& call)
{
    if (!valid_tool_name(call.name))
        throw Error(Errc::InvalidCall, fmt::format("invalid tool name '{}'", call.name));
    for (std::size_t i = 0; i < call.args.size(); ++i)
        for (std::size_t j = i + 1; j < call.args.size(); ++j)
            if (call.args[i].first == call.args[j].first)
                throw Error(Errc::InvalidCall, fmt::format("duplicate argument key '{}'", call.args[i].first));
}

Scalar scalar_from_json(const ordered_json& value)
{
    switch (value.type())
    {
        case ordered_json::value_t::null: return nullptr;
        case ordered_json::value_t::boolean: return value.get<bool>();
        case ordered_json::value_t::number_integer:
        case ordered_json::value_t::number_unsigned:
        case ordered_json::value_t::number_float: return value.get<double>();
        case ordered_json::value_t::string: return value.get<std::string>();
        default: throw Error(Errc::MalformedToolCall, "arguments must be flat scalars");
    }
}

} // namespace

bool well_formed(std::span<const Token> tokens) noexcept
{
    bool open = false;
    for (std::size_t i = 0; i < tokens.size(); ++i)
    {
        switch (tokens[i].kind)
        {
            case TokenKind::Text: break;
            case TokenKind::ToolStart:
                if (open)
                    return false;
                open = true;
                break;
            case TokenKind::ToolEnd:
                if (!open)
                    return false;
                open = false;
                break;
            case TokenKind::Eos:
                if (open || i + 1 != tokens.size())
                    return false;
                break;
        }
    }
    return !open;
}

ScalarKind kind_of(const Scalar& value) noexcept
{
    return static_cast<ScalarKind>(value.index());
}

Toolset::Toolset(std::vector<ToolSpec> tools): _tools(std::move(tools))
{
    for (std::size_t i = 0; i < _tools.size(); ++i)
        for (std::size_t j = i + 1; j < _tools.size(); ++j)
            if (_tools[i].name == _tools[j].name)
                throw Error(Errc::ConfigError, fmt::format("duplicate tool name '{}'", _tools[i].name));
}

const ToolSpec* Toolset::find(std::string_view name) const noexcept
{
    auto it = std::find_if(_tools.begin(), _tools.end(), [&](const ToolSpec& t) { return t.name == name; });
    return it == _tools.end() ? nullptr : &*it;
}

bool Toolset::speculatable(std::string_view name) const noexcept
{
    auto const* spec = find(name);
    return spec != nullptr && spec->speculatable();
}

std::string CanonicalKey::hex() const
{
    static constexpr std::array<char, 16> digits = { '0', '1', '2', '3', '4', '5', '6', '7',
                                                     '8', '9', 'a', 'b', 'c', 'd', 'e', 'f' };
    std::string out;
    out.reserve(_bytes.size() * 2);
    for (unsigned char c: _bytes)
    {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0x0f]);
    }
    return out;
}

CanonicalKey CanonicalKey::fromHex(std::string_view hex)
{
    if (hex.size() % 2 != 0)
        throw Error(Errc::ConfigError, "canonical key hex has odd length");
    std::string bytes;
    bytes.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2)
    {
        unsigned value = 0;
        auto [ptr, ec] = std::from_chars(hex.data() + i, hex.data() + i + 2, value, 16);
        if (ec != std::errc {} || ptr != hex.data() + i + 2)
            throw Error(Errc::ConfigError, fmt::format("bad hex digit in canonical key '{}'", hex));
        bytes.push_back(static_cast<char>(value));
    }
    return CanonicalKey(std::move(bytes));
}

std::size_t CanonicalKeyHash::operator()(const CanonicalKey& key) const noexcept
{
    return static_cast<std::size_t>(fnv1a(key.bytes()));
}

std::string format_number(double value)
{
    if (!std::isfinite(value))
        throw Error(Errc::InvalidCall, "non-finite numeric argument");
    if (value == 0.0)
        return "0";
    std::array<char, 32> buffer {};
    auto [ptr, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
    return std::string(buffer.data(), ptr);
}

CanonicalKey canonical_key(const ToolCall& call)
{
    check_call(call);
    std::vector<const std::pair<std::string, Scalar>*> sorted;
    sorted.reserve(call.args.size());
    for (auto const& arg: call.args)
        sorted.push_back(&arg);
    std::sort(sorted.begin(), sorted.end(), [](auto const* a, auto const* b) { return a->first < b->first; });

    std::string out = call.name;
    out += " {";
    for (std::size_t i = 0; i < sorted.size(); ++i)
    {
        if (i > 0)
            out += ',';
        out += quote(sorted[i]->first, Errc::InvalidCall);
        out += ':';
        out += scalar_json(sorted[i]->second);
    }
    out += '}';
    return CanonicalKey(std::move(out));
}

std::string args_json(const ToolCall& call)
{
    check_call(call);
    std::string out = "{";
    for (std::size_t i = 0; i < call.args.size(); ++i)
    {
        if (i > 0)
            out += ',';
        out += quote(call.args[i].first, Errc::InvalidCall);
        out += ':';
        out += scalar_json(call.args[i].second);
    }
    out += '}';
    return out;
}

std::string render_payload(const ToolCall& call)
{
    return call.name + " " + args_json(call);
}

TokenList render(const ToolCall& call)
{
    auto const rest = " " + args_json(call);
    TokenList tokens;
    tokens.reserve(3 + text_token_count(rest.size()));
    tokens.push_back(Token::toolStart());
    tokens.push_back(Token::textToken(call.name));
    for (std::size_t i = 0; i < rest.size(); i += kBytesPerToken)
        tokens.push_back(Token::textToken(rest.substr(i, kBytesPerToken)));
    tokens.push_back(Token::toolEnd());
    return tokens;
}

ToolCall parse_payload(std::string_view payload)
{
    auto const space = payload.find(' ');
    if (space == std::string_view::npos)
        throw Error(Errc::MalformedToolCall, "payload lacks 'name {args}' separator");
    ToolCall call;
    call.name = std::string(payload.substr(0, space));
    if (!valid_tool_name(call.name))
        throw Error(Errc::MalformedToolCall, fmt::format("invalid tool name '{}'", call.name));

    auto const body = payload.substr(space + 1);
    auto const parsed = ordered_json::parse(body.begin(), body.end(), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object())
        throw Error(Errc::MalformedToolCall, fmt::format("arguments are not a JSON object: '{}'", body));
    for (auto const& [key, value]: parsed.items())
        call.args.emplace_back(key, scalar_from_json(value));
    return call;
}

ToolCall extract_tool_call(std::span<const Token> tokens)
{
    std::size_t openAt = 0;
    bool open = false;
    std::size_t spanBegin = 0;
    std::size_t spanEnd = 0;
    bool found = false;
    bool sawStart = false;
    for (std::size_t i = 0; i < tokens.size(); ++i)
    {
        auto const kind = tokens[i].kind;
        if (kind == TokenKind::ToolStart)
        {
            sawStart = true;
            open = true;
            openAt = i + 1;
        }
        else if (kind == TokenKind::ToolEnd && open)
        {
            spanBegin = openAt;
            spanEnd = i;
            found = true;
            open = false;
        }
        else if (kind == TokenKind::Eos)
            break;
    }
    if (!found)
    {
        if (sawStart)
            throw Error(Errc::MalformedToolCall, "unterminated tool-call span");
        throw Error(Errc::NoToolCall, "no tool-call span in token sequence");
    }

    std::string payload;
    for (auto i = spanBegin; i < spanEnd; ++i)
    {
        if (tokens[i].kind != TokenKind::Text)
            throw Error(Errc::MalformedToolCall, "marker inside tool-call span");
        payload += tokens[i].text;
    }
    return parse_payload(payload);
}

bool has_tool_call(std::span<const Token> tokens) noexcept
{
    bool open = false;
    for (auto const& token: tokens)
    {
        if (token.kind == TokenKind::ToolStart)
            open = true;
        else if (token.kind == TokenKind::ToolEnd && open)
            return true;
    }
    return false;
}

std::string render_text(std::span<const Token> tokens)
{
    std::string out;
    bool inSpan = false;
    for (auto const& token: tokens)
    {
        if (token.kind == TokenKind::ToolStart)
            inSpan = true;
        else if (token.kind == TokenKind::ToolEnd)
            inSpan = false;
        else if (token.kind == TokenKind::Text && !inSpan)
            out += token.text;
    }
    return out;
}

std::uint64_t fnv1a(std::string_view bytes) noexcept
{
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c: bytes)
    {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string serialize(const Transcript& transcript)
{
    static constexpr std::array<const char*, 3> roles = { "user", "assistant", "tool" };
    std::string out;
    for (auto const& turn: transcript)
    {
        ordered_json line;
        line["role"] = roles[static_cast<std::size_t>(turn.role)];
        line["content"] = turn.content;
        if (turn.toolCall)
            line["tool_call"] = render_payload(*turn.toolCall);
        if (turn.toolOutput)
            line["tool_output"] = *turn.toolOutput;
        out += line.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
        out += '\n';
    }
    return out;
}

} // namespace spectool
