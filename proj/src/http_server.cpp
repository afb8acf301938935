// SPDX-License-Identifier: Apache-2.0
#include <spectool/http_server.hpp>

#include <httplib.h>

#include <fmt/format.h>

namespace spectool
{

struct CacheHttpServer::Impl
{
    httplib::Server server;
    CacheSink& sink;
    CacheServiceConfig config;

    Impl(CacheSink& s, CacheServiceConfig c): sink(s), config(c) {}
};

CacheHttpServer::CacheHttpServer(CacheSink& sink, CacheServiceConfig config)
    : _impl(std::make_unique<Impl>(sink, config))
{
    auto& impl = *_impl;
    // Let oversized bodies reach the handler's own 413 instead of being cut off.
    impl.server.set_payload_max_length(config.maxBodyBytes + 1);
    // No SO_REUSEPORT: a second server on a taken port must fail to bind.
    impl.server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    impl.server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status": "ok"})", "application/json");
    });
    impl.server.Post(R"(/cache-tool-output/([^/]+))", [&impl](const httplib::Request& req, httplib::Response& res) {
        auto const reply = post_cache_tool_output(req.matches[1].str(), req.body, impl.sink, impl.config);
        res.status = reply.status;
        res.set_content(reply.body, "application/json");
    });
    impl.server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty())
            res.set_content(fmt::format(R"({{"error": "http {}"}})", res.status), "application/json");
    });
}

CacheHttpServer::~CacheHttpServer()
{
    stop();
}

int CacheHttpServer::bind(const std::string& host, int port)
{
    if (port == 0)
    {
        auto const chosen = _impl->server.bind_to_any_port(host);
        if (chosen < 0)
            throw Error(Errc::ConfigError, fmt::format("cannot bind {} to any port", host));
        return chosen;
    }
    if (!_impl->server.bind_to_port(host, port))
        throw Error(Errc::ConfigError, fmt::format("cannot bind {}:{}", host, port));
    return port;
}

void CacheHttpServer::serve()
{
    _impl->server.listen_after_bind();
}

void CacheHttpServer::stop()
{
    if (_impl)
        _impl->server.stop();
}

} // namespace spectool
