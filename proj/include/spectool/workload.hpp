// SPDX-License-Identifier: Apache-2.0
#pragma once

// Multi-agent workloads: M agents each working through a queue of scripted
// tasks in one simulation, paired against a baseline run with identical
// seeds, plus the metrics reported per run.

#include <spectool/client.hpp>
#include <spectool/engine.hpp>
#include <spectool/mock_lm.hpp>
#include <spectool/tasks.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace spectool
{

/// Percent of the baseline time removed. Throws InvalidBaseline for t_base <= 0.
[[nodiscard]] double time_saved(double baseSeconds, double specSeconds);

/// Tokens per second. Throws InvalidWindow for elapsed <= 0.
[[nodiscard]] double throughput(double tokens, double elapsedSeconds);

/// Prices per million tokens.
struct PriceSheet
{
    double mainInput = 0;
    double mainOutput = 0;
    double specInput = 0;
    double specOutput = 0;
    double specInputDiscount = 0; // fraction of speculative input tokens not billed

    void validate() const; // throws ConfigError
};

struct CostReport
{
    double extraPer100 = 0; // speculative spend per 100 turns
    double mainPer100 = 0;  // main-model spend per 100 turns
};

[[nodiscard]] CostReport extra_cost(const Usage& usage, const PriceSheet& prices, std::size_t turns);

enum class Backend : std::uint8_t
{
    Mock,   // fixed main latency
    Engine, // engine simulator; engine_spec turns the tool cache on
};

struct WorkloadConfig
{
    std::size_t agents = 1;
    std::size_t tasksPerAgent = 32;
    LatencyDistribution tool { 1.0, 0.0 };
    SpecModelConfig spec;
    Mode mode = Mode::Baseline;
    std::uint64_t seed = 0;
    Backend backend = Backend::Mock;
    double mainLatency = 2.0; // mock backend only
    double overhead = 0.0;    // per API hop, main and speculative
    EngineConfig engine;      // engine backend only
    std::optional<PriceSheet> prices;

    void validate() const; // throws ConfigError
};

struct AgentRun
{
    std::vector<TaskResult> tasks;
    double elapsed = 0;   // until the last answer arrived
    double toolPhase = 0; // summed over tasks
    std::size_t tokens = 0;
    std::size_t turns = 0;
    std::size_t speculatedTurns = 0;
    std::size_t hits = 0;
    Usage usage;
};

struct RunMetrics
{
    double throughput = 0; // mean over agents
    std::vector<double> agentThroughput;
    double hitRate = 0;
    std::optional<double> extraCost;
    std::optional<double> mainCost;
    std::optional<double> engineWindow; // mean resident window per task, engine backend
};

struct WorkloadRun
{
    std::vector<AgentRun> agents;
    RunMetrics metrics;
};

/// Runs every agent to completion in one simulation. Throws ConfigError before
/// simulating when the library cannot serve the configuration.
[[nodiscard]] WorkloadRun run_workload(const WorkloadConfig& config, const TaskLibrary& library,
                                       std::ostream* log = nullptr);

/// Mean over agents of the per-agent tool-phase percentage saved.
[[nodiscard]] double paired_time_saved(const WorkloadRun& baseline, const WorkloadRun& speculative);

/// Sweep description loaded from a scenario file.
struct Scenario
{
    std::string name;
    WorkloadConfig base;
    std::vector<std::size_t> agents { 1 };
    std::vector<double> alphas { 0.0 };
    std::vector<std::size_t> lambdas { 1 };
    std::vector<double> toolMeans { 1.0 };
    std::size_t repetitions = 1;
    std::vector<Mode> modes { Mode::Baseline, Mode::ClientSpec };
    std::string library = "synthetic"; // or "two_turn"; ignored when files are given
    std::optional<std::filesystem::path> tasksFile;
    std::optional<std::filesystem::path> fixturesFile;
};

/// Parses a scenario; relative file references resolve against the
/// scenario's directory. SPECTOOL_SEED, when set, replaces the seed.
[[nodiscard]] Scenario load_scenario(const std::filesystem::path& path);
[[nodiscard]] Scenario parse_scenario(std::string_view text, const std::filesystem::path& baseDir = {});

[[nodiscard]] TaskLibrary scenario_library(const Scenario& scenario);

struct ResultRow
{
    Mode mode = Mode::Baseline;
    std::size_t agents = 1;
    double alpha = 0;
    std::size_t lambda = 1;
    double toolMean = 0;
    std::size_t rep = 0;
    double throughput = 0;
    double timeSavedPct = 0;
    double hitRate = 0;
    std::optional<double> extraCost;
    std::optional<double> engineWindow;
};

/// Runs the sweep: for every point a baseline run plus each requested mode,
/// all sharing seeds. `log` receives the kernel trace and engine log,
/// `outcomes` the per-turn JSON lines.
[[nodiscard]] std::vector<ResultRow> run_scenario(const Scenario& scenario, const TaskLibrary& library,
                                                  std::ostream* log = nullptr, std::ostream* outcomes = nullptr);

inline constexpr const char* kResultsHeader =
    "mode,agents,alpha,lambda,tool_mean,rep,throughput,time_saved_pct,hit_rate,extra_cost";

void write_results_csv(std::ostream& out, std::span<const ResultRow> rows);

} // namespace spectool
