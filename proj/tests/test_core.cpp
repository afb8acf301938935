// SPDX-License-Identifier: Apache-2.0
#include "helpers.hpp"

#include <spectool/core.hpp>

#include <algorithm>
#include <random>

using namespace spectool;

namespace
{

ToolCall search(std::vector<std::pair<std::string, Scalar>> args)
{
    return { "search", std::move(args) };
}

TokenList text(std::initializer_list<const char*> parts)
{
    TokenList out;
    for (auto const* p: parts)
        out.push_back(Token::textToken(p));
    return out;
}

} // namespace

TEST(CanonicalKey, ArgumentOrderDoesNotMatter)
{
    auto const a = canonical_key(search({ { "q", "llm" }, { "k", 3.0 } }));
    auto const b = canonical_key(search({ { "k", 3.0 }, { "q", "llm" } }));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.bytes(), R"(search {"k":3,"q":"llm"})");
}

TEST(CanonicalKey, IntegralRealsShareSpelling)
{
    EXPECT_EQ(canonical_key(parse_payload(R"(search {"k":3.0})")), canonical_key(parse_payload(R"(search {"k":3})")));
    EXPECT_EQ(canonical_key(parse_payload(R"(search {"k":3.0})")).bytes(), R"(search {"k":3})");
    EXPECT_EQ(canonical_key(parse_payload(R"(search {"k":1e2})")), canonical_key(search({ { "k", 100.0 } })));
    EXPECT_NE(canonical_key(search({ { "k", 3.0 } })), canonical_key(search({ { "k", 3.5 } })));
}

TEST(CanonicalKey, NameParticipates)
{
    EXPECT_NE(canonical_key(search({ { "q", "llm" } })), canonical_key(ToolCall { "fetch", { { "q", "llm" } } }));
}

TEST(CanonicalKey, StringsCompareByteExactly)
{
    EXPECT_NE(canonical_key(search({ { "q", "LLM" } })), canonical_key(search({ { "q", "llm" } })));
    EXPECT_NE(canonical_key(search({ { "q", "3" } })), canonical_key(search({ { "q", 3.0 } })));
}

TEST(CanonicalKey, DuplicateKeyIsInvalid)
{
    EXPECT_ERRC(canonical_key(search({ { "q", "a" }, { "q", "b" } })), Errc::InvalidCall);
}

TEST(CanonicalKey, HexRoundTrip)
{
    auto const key = canonical_key(search({ { "q", "ü" }, { "n", nullptr }, { "b", true } }));
    EXPECT_EQ(CanonicalKey::fromHex(key.hex()), key);
    EXPECT_ERRC(CanonicalKey::fromHex("abc"), Errc::ConfigError);
    EXPECT_ERRC(CanonicalKey::fromHex("zz"), Errc::ConfigError);
}

TEST(CanonicalKey, PureUnderPermutationFuzz)
{
    std::mt19937_64 rng(99);
    for (int round = 0; round < 500; ++round)
    {
        ToolCall call { "tool" + std::to_string(round % 7), {} };
        auto const n = 1 + rng() % 6;
        for (std::size_t i = 0; i < n; ++i)
        {
            Scalar v;
            switch (rng() % 4)
            {
            case 0: v = nullptr; break;
            case 1: v = (rng() % 2) == 0; break;
            case 2: v = static_cast<double>(static_cast<int>(rng() % 2001) - 1000) / 8.0; break;
            default: v = "s" + std::to_string(rng() % 100); break;
            }
            call.args.emplace_back("k" + std::to_string(i), v);
        }
        auto const reference = canonical_key(call);
        for (int p = 0; p < 5; ++p)
        {
            auto shuffled = call;
            std::shuffle(shuffled.args.begin(), shuffled.args.end(), rng);
            EXPECT_EQ(canonical_key(shuffled).bytes(), reference.bytes());
        }
    }
}

TEST(FormatNumber, ShortestRoundTrip)
{
    EXPECT_EQ(format_number(3.0), "3");
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(-0.0), "0");
    EXPECT_EQ(format_number(-2.5), "-2.5");
    EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
    EXPECT_ERRC(format_number(std::numeric_limits<double>::infinity()), Errc::InvalidCall);
    EXPECT_ERRC(format_number(std::nan("")), Errc::InvalidCall);
}

TEST(ExtractToolCall, DirectParse)
{
    TokenList tokens = text({ "..." });
    tokens.push_back(Token::toolStart());
    tokens.push_back(Token::textToken(R"(search {"q":"x"})"));
    tokens.push_back(Token::toolEnd());
    EXPECT_EQ(extract_tool_call(tokens), search({ { "q", "x" } }));
}

TEST(ExtractToolCall, NoSpan)
{
    TokenList tokens = text({ "hi" });
    tokens.push_back(Token::eos());
    EXPECT_ERRC(extract_tool_call(tokens), Errc::NoToolCall);
}

TEST(ExtractToolCall, UnterminatedSpan)
{
    TokenList tokens { Token::toolStart(), Token::textToken(R"(search {"q":)"), Token::eos() };
    EXPECT_ERRC(extract_tool_call(tokens), Errc::MalformedToolCall);
}

TEST(ExtractToolCall, BadPayloads)
{
    for (auto const* payload: { "search", R"(search [1])", R"(search {"q":)", R"( {"q":1})", R"(search {"q":{"a":1}})" })
    {
        TokenList tokens { Token::toolStart(), Token::textToken(payload), Token::toolEnd() };
        EXPECT_ERRC(extract_tool_call(tokens), Errc::MalformedToolCall);
    }
}

TEST(ExtractToolCall, LastCompleteCallWins)
{
    auto tokens = render(search({ { "q", "first" } }));
    auto second = render(ToolCall { "fetch", { { "id", 7.0 } } });
    tokens.insert(tokens.end(), second.begin(), second.end());
    EXPECT_EQ(extract_tool_call(tokens), (ToolCall { "fetch", { { "id", 7.0 } } }));
}

TEST(Render, RoundTripsThroughExtraction)
{
    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i)
    {
        ToolCall call { "t_" + std::to_string(i), {} };
        for (std::size_t a = 0; a < rng() % 5; ++a)
            call.args.emplace_back("arg" + std::to_string(a), std::string(rng() % 40, static_cast<char>('a' + a)));
        if (rng() % 2)
            call.args.emplace_back("num", static_cast<double>(rng() % 1000) / 10.0);
        auto const tokens = render(call);
        EXPECT_TRUE(well_formed(tokens));
        EXPECT_EQ(extract_tool_call(tokens), call);
    }
}

TEST(Render, TokenLayout)
{
    auto const call = search({ { "q", "llm" } });
    auto const tokens = render(call);
    std::string const json = R"({"q":"llm"})";
    // Markers, the name, then 4-byte chunks of " {json}".
    std::size_t const expected = 3 + (1 + json.size() + 3) / 4;
    ASSERT_EQ(tokens.size(), expected);
    EXPECT_EQ(tokens.front(), Token::toolStart());
    EXPECT_EQ(tokens[1], Token::textToken("search"));
    EXPECT_EQ(tokens.back(), Token::toolEnd());
    std::string tail;
    for (std::size_t i = 2; i + 1 < tokens.size(); ++i)
    {
        EXPECT_LE(tokens[i].text.size(), kBytesPerToken);
        tail += tokens[i].text;
    }
    EXPECT_EQ(tail, " " + json);
}

TEST(Tokens, WellFormedness)
{
    EXPECT_TRUE(well_formed(TokenList {}));
    EXPECT_TRUE(well_formed(TokenList { Token::textToken("a"), Token::eos() }));
    EXPECT_FALSE(well_formed(TokenList { Token::eos(), Token::textToken("a") }));
    EXPECT_FALSE(well_formed(TokenList { Token::eos(), Token::eos() }));
    EXPECT_FALSE(well_formed(TokenList { Token::toolStart(), Token::toolStart(), Token::toolEnd() }));
    EXPECT_FALSE(well_formed(TokenList { Token::toolStart(), Token::eos() }));
    EXPECT_FALSE(well_formed(TokenList { Token::toolEnd() }));
}

TEST(Tokens, RenderTextSkipsCallSpans)
{
    auto tokens = text({ "ab", "cd" });
    auto call = render(search({ { "q", "x" } }));
    tokens.insert(tokens.end(), call.begin(), call.end());
    tokens.push_back(Token::textToken("ef"));
    tokens.push_back(Token::eos());
    EXPECT_EQ(render_text(tokens), "abcdef");
    EXPECT_TRUE(has_tool_call(tokens));
    EXPECT_FALSE(has_tool_call(text({ "x" })));
}

TEST(Toolset, NamesUniqueAndSpeculationEligibility)
{
    EXPECT_ERRC(Toolset({ { "a", {}, true, CostClass::Cheap }, { "a", {}, true, CostClass::Cheap } }),
                Errc::ConfigError);
    Toolset const set({ { "cheap", {}, true, CostClass::Cheap },
                        { "stateful", {}, false, CostClass::Cheap },
                        { "pricey", {}, true, CostClass::Expensive } });
    EXPECT_TRUE(set.speculatable("cheap"));
    EXPECT_FALSE(set.speculatable("stateful"));
    EXPECT_FALSE(set.speculatable("pricey"));
    EXPECT_FALSE(set.speculatable("missing"));
    EXPECT_NE(set.find("pricey"), nullptr);
    EXPECT_EQ(set.find("missing"), nullptr);
}

TEST(Transcript, SerializationIsDeterministic)
{
    Transcript t { Turn::user("hi"), Turn::assistant("calling"), Turn::tool(search({ { "q", "x" } }), "out") };
    EXPECT_EQ(serialize(t), serialize(t));
    auto other = t;
    other.back().toolOutput = "different";
    EXPECT_NE(serialize(t), serialize(other));
}

TEST(Fnv1a, KnownVectors)
{
    // Published FNV-1a 64-bit test vectors.
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}
