// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <spectool/cache_service.hpp>

#include <memory>
#include <string>

namespace spectool
{

/// HTTP/1.1 transport for the cache-submission endpoint plus GET /healthz.
class CacheHttpServer
{
  public:
    CacheHttpServer(CacheSink& sink, CacheServiceConfig config = {});
    ~CacheHttpServer();
    CacheHttpServer(const CacheHttpServer&) = delete;
    CacheHttpServer& operator=(const CacheHttpServer&) = delete;

    /// Binds without serving; port 0 picks a free port. Throws ConfigError on
    /// bind failure. Returns the bound port.
    int bind(const std::string& host, int port);

    /// Serves until stop(); call after bind().
    void serve();
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> _impl;
};

} // namespace spectool
