// SPDX-License-Identifier: Apache-2.0
#include "helpers.hpp"

#include <spectool/cache_service.hpp>
#include <spectool/http_server.hpp>

#include <httplib.h>
#include <json.hpp>

#include <thread>

using namespace spectool;

namespace
{

struct StoreFixture
{
    ToolCacheStore store;
    double now = 0;
    StoreSink sink { store, [this] { return now; } };
};

constexpr const char* kOne = R"([{"name":"search","params":{"q":"llm","k":3},"output":"r1"}])";

CanonicalKey search_key()
{
    return canonical_key(ToolCall { "search", { { "q", "llm" }, { "k", 3.0 } } });
}

} // namespace

TEST(CacheService, SingleEntry)
{
    StoreFixture f;
    auto const r = post_cache_tool_output("resp-1", kOne, f.sink);
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.body, R"({"cached": 1})");
    auto const* hit = f.store.lookup_key("resp-1", search_key(), 0);
    ASSERT_NE(hit, nullptr);
    EXPECT_EQ(hit->output, "r1");
}

TEST(CacheService, EmptyArray)
{
    StoreFixture f;
    auto const r = post_cache_tool_output("resp-1", "[]", f.sink);
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.body, R"({"cached": 0})");
    EXPECT_EQ(f.store.size(), 0U);
}

TEST(CacheService, PartialAcceptance)
{
    StoreFixture f;
    auto const r = post_cache_tool_output(
        "resp-1", R"([{"name":"search","params":{"q":"llm","k":3},"output":"r1"},{"name":"fetch","params":{}}])",
        f.sink);
    EXPECT_EQ(r.status, 200);
    auto const j = nlohmann::json::parse(r.body);
    EXPECT_EQ(j.at("cached"), 1);
    ASSERT_EQ(j.at("rejected").size(), 1U);
    EXPECT_EQ(j.at("rejected")[0].at("index"), 1);
    EXPECT_EQ(f.store.size("resp-1"), 1U);
}

TEST(CacheService, MalformedBodies)
{
    StoreFixture f;
    for (auto const* body: { "", "{", R"({"name":"x"})", "42" })
    {
        auto const r = post_cache_tool_output("resp-1", body, f.sink);
        EXPECT_EQ(r.status, 400) << body;
        EXPECT_TRUE(nlohmann::json::parse(r.body).contains("error"));
    }
    EXPECT_EQ(post_cache_tool_output("", kOne, f.sink).status, 400);
    EXPECT_EQ(f.store.size(), 0U);
}

TEST(CacheService, RejectsBadEntries)
{
    auto const parsed = parse_submissions(
        R"([{"params":{},"output":"x"},{"name":"","output":"x"},{"name":"a","params":[1],"output":"x"},
            {"name":"a","params":{"n":{"deep":1}},"output":"x"},{"name":"a","output":"x","keep_alive":-1},
            {"name":"a","output":"x","keep_alive":"soon"},7])");
    EXPECT_TRUE(parsed.accepted.empty());
    EXPECT_EQ(parsed.rejected.size(), 7U);
}

TEST(CacheService, OversizedBody)
{
    StoreFixture f;
    CacheServiceConfig config;
    config.maxBodyBytes = 16;
    auto const r = post_cache_tool_output("resp-1", kOne, f.sink, config);
    EXPECT_EQ(r.status, 413);
    EXPECT_EQ(f.store.size(), 0U);
}

TEST(CacheService, Idempotent)
{
    StoreFixture f;
    auto const first = post_cache_tool_output("resp-1", kOne, f.sink);
    auto const second = post_cache_tool_output("resp-1", kOne, f.sink);
    EXPECT_EQ(first.body, second.body);
    EXPECT_EQ(f.store.size("resp-1"), 1U);
    EXPECT_EQ(f.store.lookup_key("resp-1", search_key(), 0)->output, "r1");
}

TEST(CacheService, KeepAliveExpiry)
{
    StoreFixture f;
    f.now = 10;
    auto const r = post_cache_tool_output(
        "resp-1", R"([{"name":"search","params":{"q":"llm","k":3},"output":"r1","keep_alive":0.5}])", f.sink);
    EXPECT_EQ(r.body, R"({"cached": 1})");
    EXPECT_NE(f.store.lookup_key("resp-1", search_key(), 10.4), nullptr);
    EXPECT_EQ(f.store.lookup_key("resp-1", search_key(), 10.6), nullptr);
}

TEST(CacheService, NameOnlyEntriesSkipTheKeyIndex)
{
    StoreFixture f;
    auto const r = post_cache_tool_output("resp-1", R"([{"name":"search","output":{"hits":2}}])", f.sink);
    EXPECT_EQ(r.body, R"({"cached": 1})");
    auto const* entry = f.store.lookup_name("resp-1", "search", 0);
    ASSERT_NE(entry, nullptr);
    EXPECT_EQ(entry->output, R"({"hits":2})");
    EXPECT_EQ(f.store.lookup_key("resp-1", search_key(), 0), nullptr);
}

TEST(CacheService, ArgumentOrderIsKeptForDrafts)
{
    auto const parsed = parse_submissions(R"([{"name":"search","params":{"q":"llm","k":3},"output":"r"}])");
    ASSERT_EQ(parsed.accepted.size(), 1U);
    EXPECT_EQ(parsed.accepted[0].callTokens, render(ToolCall { "search", { { "q", "llm" }, { "k", 3.0 } } }));
    EXPECT_EQ(parsed.accepted[0].key, search_key());
}

TEST(CacheService, LiveEngineRoundTrip)
{
    sim::Kernel kernel;
    Engine engine(kernel, EngineConfig {});
    sim::WallClockAdapter adapter(kernel);
    adapter.start();
    LiveEngineSink sink(adapter, engine);
    auto const r = post_cache_tool_output("resp-unknown", kOne, sink);
    EXPECT_EQ(r.body, R"({"cached": 1})");
    std::size_t stored = 0;
    adapter.call("read", [&] { stored = engine.store().size("resp-unknown"); });
    EXPECT_EQ(stored, 1U);
    adapter.stop();
}

TEST(CacheHttp, ServesOverLoopback)
{
    StoreFixture f;
    CacheServiceConfig config;
    config.maxBodyBytes = 256;
    CacheHttpServer server(f.sink, config);
    auto const port = server.bind("127.0.0.1", 0);
    ASSERT_GT(port, 0);
    std::thread serving([&] { server.serve(); });

    httplib::Client client("127.0.0.1", port);
    auto const health = client.Get("/healthz");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);

    auto const ok = client.Post("/cache-tool-output/resp-9", kOne, "application/json");
    ASSERT_TRUE(ok);
    EXPECT_EQ(ok->status, 200);
    EXPECT_EQ(ok->body, R"({"cached": 1})");

    auto const bad = client.Post("/cache-tool-output/resp-9", "{", "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400);

    auto const big = client.Post("/cache-tool-output/resp-9", std::string(1024, ' '), "application/json");
    ASSERT_TRUE(big);
    EXPECT_EQ(big->status, 413);

    auto const missing = client.Get("/nope");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);

    server.stop();
    serving.join();
    EXPECT_EQ(f.store.size("resp-9"), 1U);

    CacheHttpServer second(f.sink);
    auto const taken = second.bind("127.0.0.1", 0);
    CacheHttpServer clash(f.sink);
    EXPECT_ERRC(clash.bind("127.0.0.1", taken), Errc::ConfigError);
}
