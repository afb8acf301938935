// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared vocabulary: tokens, tools, tool calls and their canonical keys,
// conversation turns.

#include <spectool/error.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace spectool
{

enum class TokenKind : std::uint8_t
{
    Text,
    ToolStart,
    ToolEnd,
    Eos,
};

struct Token
{
    TokenKind kind = TokenKind::Text;
    std::string text; // empty for markers

    static Token textToken(std::string text) { return { TokenKind::Text, std::move(text) }; }
    static Token toolStart() { return { TokenKind::ToolStart, {} }; }
    static Token toolEnd() { return { TokenKind::ToolEnd, {} }; }
    static Token eos() { return { TokenKind::Eos, {} }; }

    friend bool operator==(const Token&, const Token&) = default;
};

using TokenList = std::vector<Token>;

/// Checks the stream invariants: EOS only as the final token, and spans never
/// nest or run into EOS unterminated.
[[nodiscard]] bool well_formed(std::span<const Token> tokens) noexcept;

/// Bytes carried by one TEXT token in the toy tokenizer used throughout.
inline constexpr std::size_t kBytesPerToken = 4;

/// Token count of free text (tool outputs, prompts) under the toy tokenizer.
[[nodiscard]] constexpr std::size_t text_token_count(std::size_t bytes) noexcept
{
    return (bytes + kBytesPerToken - 1) / kBytesPerToken;
}

/// Flat scalar argument. Integers and reals share one numeric alternative so
/// that 3 and 3.0 are the same value.
using Scalar = std::variant<std::nullptr_t, bool, double, std::string>;

enum class ScalarKind : std::uint8_t
{
    Null,
    Boolean,
    Number,
    String,
};

[[nodiscard]] ScalarKind kind_of(const Scalar& value) noexcept;

enum class CostClass : std::uint8_t
{
    Cheap,
    Expensive,
};

struct ParamSpec
{
    std::string name;
    ScalarKind kind = ScalarKind::String;
};

struct ToolSpec
{
    std::string name;
    std::vector<ParamSpec> params;
    bool stateless = true;
    CostClass costClass = CostClass::Cheap;

    /// Only stateless, cheap tools may be run ahead of the main model.
    [[nodiscard]] bool speculatable() const noexcept { return stateless && costClass == CostClass::Cheap; }
};

class Toolset
{
  public:
    Toolset() = default;
    explicit Toolset(std::vector<ToolSpec> tools); // throws ConfigError on duplicate names

    [[nodiscard]] const ToolSpec* find(std::string_view name) const noexcept;
    [[nodiscard]] bool speculatable(std::string_view name) const noexcept;
    [[nodiscard]] std::span<const ToolSpec> tools() const noexcept { return _tools; }

  private:
    std::vector<ToolSpec> _tools;
};

struct ToolCall
{
    std::string name;
    std::vector<std::pair<std::string, Scalar>> args;

    friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

/// Order-insensitive identity of a tool call. The bytes are
/// `name + ' ' + compact JSON object with keys sorted bytewise`.
class CanonicalKey
{
  public:
    CanonicalKey() = default;
    explicit CanonicalKey(std::string bytes): _bytes(std::move(bytes)) {}

    [[nodiscard]] const std::string& bytes() const noexcept { return _bytes; }
    [[nodiscard]] std::string hex() const;
    static CanonicalKey fromHex(std::string_view hex); // throws ConfigError

    friend auto operator<=>(const CanonicalKey&, const CanonicalKey&) = default;

  private:
    std::string _bytes;
};

struct CanonicalKeyHash
{
    std::size_t operator()(const CanonicalKey& key) const noexcept;
};

/// Shortest round-trip decimal spelling; -0 is spelled "0". Non-finite values
/// throw InvalidCall.
[[nodiscard]] std::string format_number(double value);

[[nodiscard]] CanonicalKey canonical_key(const ToolCall& call);

/// Compact JSON object of the arguments in call order.
[[nodiscard]] std::string args_json(const ToolCall& call);

/// `name {json}` payload carried between TOOL_START and TOOL_END.
[[nodiscard]] std::string render_payload(const ToolCall& call);

/// Tokenizes a call: TOOL_START, TEXT(name), 4-byte chunks of " {json}", TOOL_END.
[[nodiscard]] TokenList render(const ToolCall& call);

/// Parses `name {json}`; throws MalformedToolCall.
[[nodiscard]] ToolCall parse_payload(std::string_view payload);

/// Last complete tool call in the sequence. Throws NoToolCall when no span
/// starts, MalformedToolCall when no span completes or the payload is bad.
[[nodiscard]] ToolCall extract_tool_call(std::span<const Token> tokens);

[[nodiscard]] bool has_tool_call(std::span<const Token> tokens) noexcept;

/// Concatenated TEXT tokens outside of tool-call spans.
[[nodiscard]] std::string render_text(std::span<const Token> tokens);

/// 64-bit FNV-1a, stable across platforms.
[[nodiscard]] std::uint64_t fnv1a(std::string_view bytes) noexcept;

enum class Role : std::uint8_t
{
    User,
    Assistant,
    Tool,
};

struct Turn
{
    Role role = Role::User;
    std::string content;
    std::optional<ToolCall> toolCall;
    std::optional<std::string> toolOutput;

    static Turn user(std::string content) { return { Role::User, std::move(content), {}, {} }; }
    static Turn assistant(std::string content) { return { Role::Assistant, std::move(content), {}, {} }; }
    static Turn tool(ToolCall call, std::string output)
    {
        return { Role::Tool, {}, std::move(call), std::move(output) };
    }

    friend bool operator==(const Turn&, const Turn&) = default;
};

using Transcript = std::vector<Turn>;

/// Deterministic byte serialization (JSON lines) used for equivalence checks.
[[nodiscard]] std::string serialize(const Transcript& transcript);

} // namespace spectool
