// SPDX-License-Identifier: Apache-2.0
#include <spectool/cache_service.hpp>

#include <json.hpp>

#include <cmath>
#include <fmt/format.h>

namespace spectool
{

namespace
{

// Preserve the client's argument order so drafts match what the model would print.
using json = nlohmann::ordered_json;

std::string error_body(std::string_view message)
{
    return json { { "error", message } }.dump();
}

Scalar to_scalar(const json& value)
{
    switch (value.type())
    {
    case json::value_t::null: return nullptr;
    case json::value_t::boolean: return value.get<bool>();
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::number_float: return value.get<double>();
    case json::value_t::string: return value.get<std::string>();
    default: throw Error(Errc::InvalidCall, "params must be a flat object of scalars");
    }
}

CacheSubmit parse_entry(const json& item)
{
    if (!item.is_object())
        throw Error(Errc::InvalidCall, "entry is not an object");
    auto const name = item.find("name");
    if (name == item.end() || !name->is_string() || name->get<std::string>().empty())
        throw Error(Errc::InvalidCall, "name must be a non-empty string");
    auto const output = item.find("output");
    if (output == item.end())
        throw Error(Errc::InvalidCall, "output is required");

    CacheSubmit entry;
    entry.name = name->get<std::string>();
    entry.output = output->is_string() ? output->get<std::string>() : output->dump();

    if (auto const ttl = item.find("keep_alive"); ttl != item.end() && !ttl->is_null())
    {
        if (!ttl->is_number() || !std::isfinite(ttl->get<double>()) || ttl->get<double>() < 0)
            throw Error(Errc::InvalidCall, "keep_alive must be a non-negative number of seconds");
        entry.keepAlive = ttl->get<double>();
    }

    auto const params = item.find("params");
    if (params == item.end() || params->is_null())
    {
        // Name-only entries can seed a draft but never match a full key.
        entry.callTokens = { Token::toolStart(), Token::textToken(entry.name) };
        return entry;
    }
    if (!params->is_object())
        throw Error(Errc::InvalidCall, "params must be an object");
    ToolCall call { entry.name, {} };
    for (auto const& [k, v]: params->items())
        call.args.emplace_back(k, to_scalar(v));
    entry.key = canonical_key(call);
    entry.callTokens = render(call);
    return entry;
}

} // namespace

ParsedSubmissions parse_submissions(std::string_view body)
{
    json doc;
    try
    {
        doc = json::parse(body.begin(), body.end());
    }
    catch (const json::exception& e)
    {
        throw Error(Errc::MalformedToolCall, fmt::format("body is not JSON: {}", e.what()));
    }
    if (!doc.is_array())
        throw Error(Errc::MalformedToolCall, "body must be a JSON array");

    ParsedSubmissions parsed;
    for (std::size_t i = 0; i < doc.size(); ++i)
    {
        try
        {
            parsed.accepted.push_back(parse_entry(doc[i]));
        }
        catch (const Error& e)
        {
            parsed.rejected.push_back({ i, e.what() });
        }
    }
    return parsed;
}

std::size_t StoreSink::submit(const ResponseId& rid, CacheSubmit entry)
{
    return _store.submit(rid, std::move(entry), _clock());
}

std::size_t LiveEngineSink::submit(const ResponseId& rid, CacheSubmit entry)
{
    std::size_t accepted = 0;
    _adapter.call(fmt::format("wire.cache-submit {}", rid),
                  [&] { accepted = _engine.accept_submission(rid, std::move(entry)); });
    return accepted;
}

ServiceResponse post_cache_tool_output(const ResponseId& rid, std::string_view body, CacheSink& sink,
                                       const CacheServiceConfig& config)
{
    if (body.size() > config.maxBodyBytes)
        return { 413, error_body(fmt::format("body exceeds {} bytes", config.maxBodyBytes)) };
    if (rid.empty())
        return { 400, error_body("missing response id") };

    ParsedSubmissions parsed;
    try
    {
        parsed = parse_submissions(body);
    }
    catch (const Error& e)
    {
        return { 400, error_body(e.what()) };
    }

    std::size_t cached = 0;
    for (auto& entry: parsed.accepted)
        cached += sink.submit(rid, std::move(entry));

    // Keep the documented body byte-exact; diagnostics only appear when needed.
    if (parsed.rejected.empty())
        return { 200, fmt::format("{{\"cached\": {}}}", cached) };
    json rejected = json::array();
    for (auto const& r: parsed.rejected)
        rejected.push_back({ { "index", r.index }, { "error", r.error } });
    return { 200, fmt::format("{{\"cached\": {}, \"rejected\": {}}}", cached, rejected.dump()) };
}

} // namespace spectool
