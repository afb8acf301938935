// SPDX-License-Identifier: Apache-2.0
#pragma once

// Engine-side store of pre-executed tool results, indexed per response id by
// canonical key (for ingesting outputs) and by tool name (for drafting the
// call tokens).

#include <spectool/core.hpp>
#include <spectool/sim.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace spectool
{

using ResponseId = std::string;

struct CacheEntry
{
    std::optional<CanonicalKey> key; // absent for name-only submissions
    std::string name;
    TokenList callTokens;
    std::string output;
    sim::Seconds submittedAt = 0;
    std::optional<double> keepAlive;
    std::uint64_t order = 0; // submission order; larger is later

    [[nodiscard]] bool expired(sim::Seconds now) const noexcept
    {
        return keepAlive && now > submittedAt + *keepAlive;
    }
    [[nodiscard]] std::size_t outputTokens() const noexcept { return text_token_count(output.size()); }
};

struct CacheSubmit
{
    std::optional<CanonicalKey> key;
    std::string name;
    TokenList callTokens;
    std::string output;
    std::optional<double> keepAlive;
};

class ToolCacheStore
{
  public:
    /// Stores or overwrites the entry; always accepted, returns 1.
    std::size_t submit(const ResponseId& rid, CacheSubmit entry, sim::Seconds now);

    [[nodiscard]] const CacheEntry* lookup_key(const ResponseId& rid, const CanonicalKey& key, sim::Seconds now) const;

    /// Latest unexpired entry for the tool name.
    [[nodiscard]] const CacheEntry* lookup_name(const ResponseId& rid, const std::string& name,
                                                sim::Seconds now) const;

    /// Drops every entry of the response; returns how many were removed.
    std::size_t purge(const ResponseId& rid);

    [[nodiscard]] std::size_t size() const noexcept;
    [[nodiscard]] std::size_t size(const ResponseId& rid) const noexcept;

  private:
    struct Bucket
    {
        std::vector<std::shared_ptr<CacheEntry>> entries; // submission order
    };

    std::map<ResponseId, Bucket> _buckets;
    std::uint64_t _nextOrder = 0;
};

} // namespace spectool
