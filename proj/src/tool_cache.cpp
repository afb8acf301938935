// SPDX-License-Identifier: Apache-2.0
#include <spectool/tool_cache.hpp>

#include <algorithm>

namespace spectool
{

std::size_t ToolCacheStore::submit(const ResponseId& rid, CacheSubmit entry, sim::Seconds now)
{
    auto& entries = _buckets[rid].entries;
    // An identical identity replaces the older entry so resubmission is idempotent.
    auto const same = [&](const std::shared_ptr<CacheEntry>& e) {
        if (entry.key)
            return e->key == entry.key;
        return !e->key && e->name == entry.name && e->callTokens == entry.callTokens;
    };
    std::erase_if(entries, same);
    entries.push_back(std::make_shared<CacheEntry>(CacheEntry {
        .key = std::move(entry.key),
        .name = std::move(entry.name),
        .callTokens = std::move(entry.callTokens),
        .output = std::move(entry.output),
        .submittedAt = now,
        .keepAlive = entry.keepAlive,
        .order = _nextOrder++,
    }));
    return 1;
}

const CacheEntry* ToolCacheStore::lookup_key(const ResponseId& rid, const CanonicalKey& key, sim::Seconds now) const
{
    auto const bucket = _buckets.find(rid);
    if (bucket == _buckets.end())
        return nullptr;
    for (auto const& e: bucket->second.entries)
        if (e->key == key && !e->expired(now))
            return e.get();
    return nullptr;
}

const CacheEntry* ToolCacheStore::lookup_name(const ResponseId& rid, const std::string& name, sim::Seconds now) const
{
    auto const bucket = _buckets.find(rid);
    if (bucket == _buckets.end())
        return nullptr;
    auto const& entries = bucket->second.entries;
    for (auto it = entries.rbegin(); it != entries.rend(); ++it)
        if ((*it)->name == name && !(*it)->expired(now))
            return it->get();
    return nullptr;
}

std::size_t ToolCacheStore::purge(const ResponseId& rid)
{
    auto const bucket = _buckets.find(rid);
    if (bucket == _buckets.end())
        return 0;
    auto const n = bucket->second.entries.size();
    _buckets.erase(bucket);
    return n;
}

std::size_t ToolCacheStore::size() const noexcept
{
    std::size_t n = 0;
    for (auto const& [rid, bucket]: _buckets)
        n += bucket.entries.size();
    return n;
}

std::size_t ToolCacheStore::size(const ResponseId& rid) const noexcept
{
    auto const bucket = _buckets.find(rid);
    return bucket == _buckets.end() ? 0 : bucket->second.entries.size();
}

} // namespace spectool
