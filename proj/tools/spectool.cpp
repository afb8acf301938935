// SPDX-License-Identifier: Apache-2.0
// spectool: analytic sweeps, workload simulations, the cache service and plots.

#include <spectool/analytic.hpp>
#include <spectool/cache_service.hpp>
#include <spectool/engine.hpp>
#include <spectool/error.hpp>
#include <spectool/http_server.hpp>
#include <spectool/plot.hpp>
#include <spectool/sim.hpp>
#include <spectool/workload.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <pthread.h>
#include <unistd.h>

namespace
{

using namespace spectool;

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

/// Output file, or stdout for "-" and the empty path.
class Sink
{
  public:
    explicit Sink(const std::string& path)
    {
        if (path.empty() || path == "-")
            return;
        _file.open(path, std::ios::binary);
        if (!_file)
            throw Error(Errc::ConfigError, fmt::format("cannot write '{}'", path));
    }
    std::ostream& stream() { return _file.is_open() ? _file : std::cout; }

  private:
    std::ofstream _file;
};

std::vector<Mode> parse_modes(const std::string& text)
{
    std::vector<Mode> modes;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ','))
        modes.push_back(parse_mode(item));
    if (modes.empty())
        throw Error(Errc::ConfigError, "--mode lists no modes");
    return modes;
}

struct SweepArgs
{
    std::string alpha = "0:1:0.1";
    std::string ratio = "0.1:0.9:0.1";
    std::string tool = "0.5:3:0.5";
    double mainLatency = 1.0;
    std::string out;
};

int model_sweep(const SweepArgs& a)
{
    analytic::SweepGrid grid;
    grid.acceptance = analytic::Range::parse(a.alpha).values();
    grid.specRatio = analytic::Range::parse(a.ratio).values();
    grid.toolLatency = analytic::Range::parse(a.tool).values();
    grid.mainLatency = a.mainLatency;
    auto const rows = analytic::sweep_client(grid);
    Sink out(a.out);
    analytic::write_sweep_csv(out.stream(), rows);
    return 0;
}

struct SimulateArgs
{
    std::string scenario;
    std::string modes;
    std::string out = "results.csv";
    std::string log;
    std::string outcomes;
};

Scenario scenario_with_modes(const SimulateArgs& a)
{
    if (!std::filesystem::exists(a.scenario))
        throw Error(Errc::ConfigError, fmt::format("scenario '{}' does not exist", a.scenario));
    auto scenario = load_scenario(a.scenario);
    if (!a.modes.empty())
        scenario.modes = parse_modes(a.modes);
    return scenario;
}

int simulate(const SimulateArgs& a)
{
    auto const scenario = scenario_with_modes(a);
    auto const library = scenario_library(scenario);

    std::optional<Sink> log;
    std::optional<Sink> outcomes;
    if (!a.log.empty())
        log.emplace(a.log);
    if (!a.outcomes.empty())
        outcomes.emplace(a.outcomes);
    auto const rows = run_scenario(scenario, library, log ? &log->stream() : nullptr,
                                   outcomes ? &outcomes->stream() : nullptr);

    {
        std::ostringstream csv;
        write_results_csv(csv, rows);
        if (a.out == "-")
            std::cout << csv.str();
        else
        {
            Sink out(a.out);
            out.stream() << csv.str();
        }
    }

    if (a.out != "-")
        for (auto const& r: rows)
        {
            std::cout << fmt::format("mode={} agents={} alpha={} lambda={} tool_mean={} rep={} throughput={:.6f} "
                                     "time_saved_pct={:.6f} hit_rate={:.6f}",
                                     to_string(r.mode), r.agents, format_number(r.alpha), r.lambda,
                                     format_number(r.toolMean), r.rep, r.throughput, r.timeSavedPct, r.hitRate);
            if (r.engineWindow)
                std::cout << fmt::format(" engine_window={:.6f}", *r.engineWindow);
            std::cout << '\n';
        }
    return 0;
}

int compare(const SimulateArgs& a)
{
    auto scenario = scenario_with_modes(a);
    auto const library = scenario_library(scenario);
    auto const rows = run_scenario(scenario, library);

    struct Stats
    {
        double min = 0, max = 0, sum = 0;
        std::size_t n = 0;
    };
    // Grouped over repetitions, keyed in run order.
    std::vector<std::pair<std::string, Stats>> groups;
    std::map<std::string, std::size_t> index;
    for (auto const& r: rows)
    {
        auto const key = fmt::format("{:<12} {:>6} {:>6} {:>6} {:>9}", to_string(r.mode), r.agents,
                                     format_number(r.alpha), r.lambda, format_number(r.toolMean));
        auto [it, fresh] = index.emplace(key, groups.size());
        if (fresh)
            groups.push_back({ key, Stats { r.timeSavedPct, r.timeSavedPct, 0, 0 } });
        auto& s = groups[it->second].second;
        s.min = std::min(s.min, r.timeSavedPct);
        s.max = std::max(s.max, r.timeSavedPct);
        s.sum += r.timeSavedPct;
        ++s.n;
    }
    std::cout << fmt::format("{:<12} {:>6} {:>6} {:>6} {:>9} {:>10} {:>10} {:>10}\n", "mode", "agents", "alpha",
                             "lambda", "tool_mean", "saved_min", "saved_mean", "saved_max");
    for (auto const& [key, s]: groups)
    {
        auto const clean = [](double v) { return std::fabs(v) < 5e-7 ? 0.0 : v; };
        std::cout << fmt::format("{} {:>10.3f} {:>10.3f} {:>10.3f}\n", key, clean(s.min),
                                 clean(s.sum / static_cast<double>(s.n)), clean(s.max));
    }
    return 0;
}

struct ServeArgs
{
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t maxBody = CacheServiceConfig {}.maxBodyBytes;
};

int serve(const ServeArgs& a)
{
    // Signals go to a dedicated waiter thread, never to a handler.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    sim::Kernel kernel;
    EngineConfig engineConfig;
    engineConfig.prefixCache = true;
    engineConfig.toolCache = true;
    Engine engine(kernel, engineConfig);
    sim::WallClockAdapter adapter(kernel);
    LiveEngineSink sink(adapter, engine);
    CacheHttpServer server(sink, CacheServiceConfig { a.maxBody });

    int port = 0;
    try
    {
        port = server.bind(a.host, a.port);
    }
    catch (const Error& e)
    {
        std::cerr << "spectool serve: " << e.what() << '\n';
        return kRuntimeFailure;
    }
    adapter.start();
    std::cout << fmt::format("listening on http://{}:{}", a.host, port) << std::endl;

    std::thread waiter([&] {
        int received = 0;
        sigwait(&signals, &received);
        server.stop();
    });
    server.serve();
    // serve() only returns after stop(); wake the waiter if it is still parked.
    kill(getpid(), SIGTERM);
    waiter.join();
    adapter.stop();
    return 0;
}

struct PlotArgs
{
    std::string input;
    std::string outDir = ".";
};

int plot(const PlotArgs& a)
{
    std::ifstream in(a.input, std::ios::binary);
    if (!in)
        throw Error(Errc::ConfigError, fmt::format("cannot open '{}'", a.input));
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto const files = plot_csv(buffer.str());
    std::filesystem::create_directories(a.outDir);
    for (auto const& f: files)
    {
        auto const path = std::filesystem::path(a.outDir) / f.name;
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw Error(Errc::ConfigError, fmt::format("cannot write '{}'", path.string()));
        out << f.svg;
        std::cout << path.string() << '\n';
    }
    return 0;
}

bool usage_error(Errc code)
{
    switch (code)
    {
    case Errc::ConfigError:
    case Errc::EmptyGrid:
    case Errc::InvalidScenario:
    case Errc::LemmaHypothesisViolated: return true;
    default: return false;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "Speculative tool-calling models, simulations and cache service", "spectool" };
    app.require_subcommand(1);

    SweepArgs sweepArgs;
    auto* sweepCmd = app.add_subcommand("model-sweep", "closed-form client speedup over a grid");
    sweepCmd->add_option("--alpha", sweepArgs.alpha, "acceptance range start:stop:step");
    sweepCmd->add_option("--g-ratio", sweepArgs.ratio, "g/G range start:stop:step");
    sweepCmd->add_option("--tool-time", sweepArgs.tool, "tool latency range start:stop:step (seconds)");
    sweepCmd->add_option("--G", sweepArgs.mainLatency, "main-model latency (seconds)");
    sweepCmd->add_option("--out", sweepArgs.out, "CSV path, stdout when omitted");

    SimulateArgs simArgs;
    auto* simCmd = app.add_subcommand("simulate", "run a scenario and write results.csv");
    simCmd->add_option("--scenario", simArgs.scenario, "scenario JSON")->required();
    simCmd->add_option("--mode", simArgs.modes, "comma-separated subset of baseline,client_spec,engine_spec");
    simCmd->add_option("--out", simArgs.out, "results CSV path, '-' for stdout");
    simCmd->add_option("--log", simArgs.log, "event log path");
    simCmd->add_option("--outcomes", simArgs.outcomes, "per-turn JSON lines path");

    SimulateArgs cmpArgs;
    auto* cmpCmd = app.add_subcommand("compare", "paired time-saved table for a scenario");
    cmpCmd->add_option("--scenario", cmpArgs.scenario, "scenario JSON")->required();
    cmpCmd->add_option("--mode", cmpArgs.modes, "comma-separated modes");

    ServeArgs serveArgs;
    auto* serveCmd = app.add_subcommand("serve", "cache service against a live engine");
    serveCmd->add_option("--host", serveArgs.host, "bind address");
    serveCmd->add_option("--port", serveArgs.port, "port, 0 for any free port")->check(CLI::Range(0, 65535));
    serveCmd->add_option("--max-body", serveArgs.maxBody, "largest accepted body in bytes");

    PlotArgs plotArgs;
    auto* plotCmd = app.add_subcommand("plot", "SVG charts from a sweep or results CSV");
    plotCmd->add_option("--input", plotArgs.input, "CSV file")->required();
    plotCmd->add_option("--out-dir", plotArgs.outDir, "directory for the SVG files");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return kUsageError;
    }

    try
    {
        if (*sweepCmd)
            return model_sweep(sweepArgs);
        if (*simCmd)
            return simulate(simArgs);
        if (*cmpCmd)
            return compare(cmpArgs);
        if (*serveCmd)
            return serve(serveArgs);
        if (*plotCmd)
            return plot(plotArgs);
    }
    catch (const Error& e)
    {
        std::cerr << "spectool: " << e.what() << '\n';
        return usage_error(e.code()) ? kUsageError : kRuntimeFailure;
    }
    catch (const std::exception& e)
    {
        std::cerr << "spectool: " << e.what() << '\n';
        return kRuntimeFailure;
    }
    return kUsageError;
}
