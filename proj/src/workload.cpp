// SPDX-License-Identifier: Apache-2.0
#include <spectool/workload.hpp>

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace spectool
{

namespace
{

using json = nlohmann::json;

bool finite_non_negative(double v) noexcept
{
    return std::isfinite(v) && v >= 0;
}

std::string csv_number(double v)
{
    // Keep rounding residue from printing as -0.000000.
    if (std::fabs(v) < 5e-7)
        v = 0;
    return fmt::format("{:.6f}", v);
}

} // namespace

double time_saved(double baseSeconds, double specSeconds)
{
    if (!(baseSeconds > 0) || !std::isfinite(baseSeconds))
        throw Error(Errc::InvalidBaseline, fmt::format("baseline time {} must be positive", baseSeconds));
    return 100.0 * (baseSeconds - specSeconds) / baseSeconds;
}

double throughput(double tokens, double elapsedSeconds)
{
    if (!(elapsedSeconds > 0) || !std::isfinite(elapsedSeconds))
        throw Error(Errc::InvalidWindow, fmt::format("elapsed time {} must be positive", elapsedSeconds));
    return tokens / elapsedSeconds;
}

void PriceSheet::validate() const
{
    for (double v: { mainInput, mainOutput, specInput, specOutput })
        if (!finite_non_negative(v))
            throw Error(Errc::ConfigError, "prices must be non-negative");
    if (!(specInputDiscount >= 0 && specInputDiscount <= 1))
        throw Error(Errc::ConfigError, "speculative input discount must lie in [0, 1]");
}

CostReport extra_cost(const Usage& usage, const PriceSheet& prices, std::size_t turns)
{
    prices.validate();
    if (turns == 0)
        throw Error(Errc::InvalidWindow, "cost per turn needs at least one turn");
    auto const perMillion = [](double tokens, double price) { return tokens * price / 1e6; };
    auto const spec = perMillion(static_cast<double>(usage.specInput) * (1.0 - prices.specInputDiscount),
                                 prices.specInput)
                    + perMillion(static_cast<double>(usage.specOutput), prices.specOutput);
    auto const main = perMillion(static_cast<double>(usage.mainInput), prices.mainInput)
                    + perMillion(static_cast<double>(usage.mainOutput), prices.mainOutput);
    auto const scale = 100.0 / static_cast<double>(turns);
    return { spec * scale, main * scale };
}

void WorkloadConfig::validate() const
{
    if (agents < 1 || tasksPerAgent < 1)
        throw Error(Errc::ConfigError, "need at least one agent and one task per agent");
    if (!finite_non_negative(tool.mean) || !finite_non_negative(tool.stddev))
        throw Error(Errc::ConfigError, "tool latency mean and stddev must be non-negative");
    if (!finite_non_negative(overhead))
        throw Error(Errc::ConfigError, "overhead must be non-negative");
    if (mode != Mode::Baseline)
        spec.validate();
    if (backend == Backend::Mock)
    {
        if (!finite_non_negative(mainLatency))
            throw Error(Errc::ConfigError, "main latency must be non-negative");
        if (mode == Mode::EngineSpec)
            throw Error(Errc::ConfigError, "engine_spec needs the engine backend");
    }
    else
    {
        engine.validate();
    }
    if (prices)
        prices->validate();
}

WorkloadRun run_workload(const WorkloadConfig& config, const TaskLibrary& library, std::ostream* log)
{
    config.validate();
    library.validate();

    ScriptTiming timing;
    if (config.backend == Backend::Mock)
        timing.fixedLatency = config.mainLatency;
    else
    {
        timing.prefillRate = config.engine.prefillRate;
        timing.decodeRate = config.engine.decodeRate;
    }
    std::vector<std::shared_ptr<const GenerationScript>> scripts;
    scripts.reserve(library.tasks.size());
    for (auto const& task: library.tasks)
        scripts.push_back(build_script(task, timing));
    auto const toolset = std::make_shared<const Toolset>(library.tools);

    sim::Kernel kernel;
    kernel.set_trace(log);
    ToolRuntime runtime(config.tool, library.fixtures, std::string("__speculative_miss__"));

    std::unique_ptr<Engine> engine;
    std::unique_ptr<MainEndpoint> endpoint;
    if (config.backend == Backend::Engine)
    {
        auto engineConfig = config.engine;
        engineConfig.overhead = config.overhead;
        engineConfig.toolCache = config.mode == Mode::EngineSpec;
        engine = std::make_unique<Engine>(kernel, engineConfig);
        engine->set_log(log);
        endpoint = std::make_unique<EngineEndpoint>(*engine);
    }
    else
    {
        endpoint = std::make_unique<FixedLatencyEndpoint>(kernel, config.overhead);
    }

    std::vector<std::unique_ptr<Agent>> agents;
    for (std::size_t a = 0; a < config.agents; ++a)
    {
        std::vector<TaskSpec> tasks;
        for (std::size_t j = 0; j < config.tasksPerAgent; ++j)
        {
            auto const slot = a * config.tasksPerAgent + j;
            auto const& def = library.tasks[slot % library.tasks.size()];
            tasks.push_back({ scripts[slot % scripts.size()], slot, fmt::format("a{}/{}/{}", a, j, def.id) });
        }
        AgentConfig agentConfig { a, config.mode, config.spec, config.overhead, config.seed, toolset };
        agents.push_back(std::make_unique<Agent>(kernel, std::move(agentConfig), *endpoint, runtime, std::move(tasks)));
    }
    for (auto& agent: agents)
        agent->start();
    kernel.run_until_idle();

    WorkloadRun run;
    Usage total;
    std::size_t turns = 0;
    std::size_t speculated = 0;
    std::size_t hits = 0;
    double throughputSum = 0;
    double windowSum = 0;
    std::size_t windows = 0;
    for (auto const& agent: agents)
    {
        if (!agent->done())
            throw Error(Errc::SimulationError, fmt::format("agent {} stalled", agent->config().agent));
        AgentRun r;
        r.tasks = agent->results();
        for (auto const& task: r.tasks)
        {
            r.elapsed = std::max(r.elapsed, task.finishedAt);
            r.toolPhase += task.toolPhase();
            r.tokens += task.tokens;
            r.turns += task.turns.size();
            for (auto const& t: task.turns)
                if (t.toolCall && t.speculated)
                {
                    ++r.speculatedTurns;
                    r.hits += t.hit ? 1 : 0;
                }
            auto& u = r.usage;
            u.mainCalls += task.usage.mainCalls;
            u.mainInput += task.usage.mainInput;
            u.mainOutput += task.usage.mainOutput;
            u.specCalls += task.usage.specCalls;
            u.specInput += task.usage.specInput;
            u.specOutput += task.usage.specOutput;
        }
        if (engine)
            for (auto const& task: r.tasks)
                if (auto const* marks = engine->marks(task.session))
                {
                    windowSum += marks->resident_window();
                    ++windows;
                }
        auto const tp = throughput(static_cast<double>(r.tokens), r.elapsed);
        run.metrics.agentThroughput.push_back(tp);
        throughputSum += tp;
        turns += r.turns;
        speculated += r.speculatedTurns;
        hits += r.hits;
        total.mainInput += r.usage.mainInput;
        total.mainOutput += r.usage.mainOutput;
        total.specInput += r.usage.specInput;
        total.specOutput += r.usage.specOutput;
        total.mainCalls += r.usage.mainCalls;
        total.specCalls += r.usage.specCalls;
        run.agents.push_back(std::move(r));
    }
    run.metrics.throughput = throughputSum / static_cast<double>(agents.size());
    run.metrics.hitRate = speculated == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(speculated);
    if (config.prices)
    {
        auto const cost = extra_cost(total, *config.prices, turns);
        run.metrics.extraCost = cost.extraPer100;
        run.metrics.mainCost = cost.mainPer100;
    }
    if (windows > 0)
        run.metrics.engineWindow = windowSum / static_cast<double>(windows);
    return run;
}

double paired_time_saved(const WorkloadRun& baseline, const WorkloadRun& speculative)
{
    if (baseline.agents.size() != speculative.agents.size() || baseline.agents.empty())
        throw Error(Errc::ConfigError, "paired runs need the same agents");
    double sum = 0;
    for (std::size_t a = 0; a < baseline.agents.size(); ++a)
        sum += time_saved(baseline.agents[a].toolPhase, speculative.agents[a].toolPhase);
    return sum / static_cast<double>(baseline.agents.size());
}

namespace
{

template<typename T>
std::vector<T> number_list(const json& v, const char* field)
{
    std::vector<T> out;
    auto const one = [&](const json& x) {
        if (!x.is_number())
            throw Error(Errc::ConfigError, fmt::format("'{}' must hold numbers", field));
        if constexpr (std::is_integral_v<T>)
        {
            if (!x.is_number_integer() || x.get<long long>() < 0)
                throw Error(Errc::ConfigError, fmt::format("'{}' must hold non-negative integers", field));
        }
        out.push_back(x.get<T>());
    };
    if (v.is_array())
        for (auto const& x: v)
            one(x);
    else
        one(v);
    if (out.empty())
        throw Error(Errc::ConfigError, fmt::format("'{}' is empty", field));
    return out;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const char* where)
{
    if (!obj.is_object())
        throw Error(Errc::ConfigError, fmt::format("{} must be an object", where));
    std::set<std::string> allowed(known.begin(), known.end());
    for (auto const& [k, v]: obj.items())
        if (!allowed.contains(k))
            throw Error(Errc::ConfigError, fmt::format("unknown field '{}' in {}", k, where));
}

double number(const json& obj, const char* key, double fallback)
{
    auto const it = obj.find(key);
    if (it == obj.end())
        return fallback;
    if (!it->is_number())
        throw Error(Errc::ConfigError, fmt::format("'{}' must be a number", key));
    return it->get<double>();
}

std::optional<std::uint64_t> env_seed()
{
    auto const* raw = std::getenv("SPECTOOL_SEED");
    if (!raw || !*raw)
        return std::nullopt;
    std::string_view text(raw);
    std::uint64_t seed = 0;
    auto const [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc {} || ptr != text.data() + text.size())
        throw Error(Errc::ConfigError, fmt::format("SPECTOOL_SEED '{}' is not an unsigned integer", text));
    return seed;
}

} // namespace

Scenario parse_scenario(std::string_view text, const std::filesystem::path& baseDir)
{
    json doc;
    try
    {
        doc = json::parse(text.begin(), text.end());
    }
    catch (const json::exception& e)
    {
        throw Error(Errc::ConfigError, fmt::format("scenario is not JSON: {}", e.what()));
    }
    reject_unknown(doc,
                   { "name", "seed", "agents", "tasks_per_agent", "repetitions", "modes", "backend", "main_latency",
                     "overhead", "engine", "spec", "tool", "prices", "library", "tasks", "fixtures" },
                   "scenario");

    Scenario s;
    auto& w = s.base;
    try
    {
        s.name = doc.value("name", std::string("scenario"));
        w.seed = doc.value("seed", std::uint64_t { 0 });
        if (doc.contains("agents"))
            s.agents = number_list<std::size_t>(doc["agents"], "agents");
        w.tasksPerAgent = doc.value("tasks_per_agent", std::size_t { 32 });
        s.repetitions = doc.value("repetitions", std::size_t { 1 });
        if (doc.contains("modes"))
        {
            s.modes.clear();
            for (auto const& m: doc["modes"])
                s.modes.push_back(parse_mode(m.get<std::string>()));
        }
        auto const backend = doc.value("backend", std::string("mock"));
        if (backend != "mock" && backend != "engine")
            throw Error(Errc::ConfigError, fmt::format("unknown backend '{}'", backend));
        w.backend = backend == "mock" ? Backend::Mock : Backend::Engine;
        w.mainLatency = number(doc, "main_latency", w.mainLatency);
        w.overhead = number(doc, "overhead", w.overhead);

        if (doc.contains("engine"))
        {
            auto const& e = doc["engine"];
            reject_unknown(e, { "batch_size", "prefill_rate", "decode_rate", "prefix_cache", "verify_cost" }, "engine");
            w.engine.batchSize = e.value("batch_size", w.engine.batchSize);
            w.engine.prefillRate = number(e, "prefill_rate", w.engine.prefillRate);
            w.engine.decodeRate = number(e, "decode_rate", w.engine.decodeRate);
            w.engine.prefixCache = e.value("prefix_cache", true);
            auto const verify = e.value("verify_cost", std::string("single_pass"));
            if (verify != "single_pass" && verify != "per_token")
                throw Error(Errc::ConfigError, fmt::format("unknown verify_cost '{}'", verify));
            w.engine.verifyCost = verify == "single_pass" ? VerifyCost::SinglePass : VerifyCost::PerToken;
        }
        else
        {
            w.engine.prefixCache = true;
        }

        if (doc.contains("spec"))
        {
            auto const& sp = doc["spec"];
            reject_unknown(sp, { "latency", "alpha", "lambda", "forced_hits" }, "spec");
            w.spec.latency = number(sp, "latency", w.spec.latency);
            if (sp.contains("alpha"))
                s.alphas = number_list<double>(sp["alpha"], "alpha");
            if (sp.contains("lambda"))
                s.lambdas = number_list<std::size_t>(sp["lambda"], "lambda");
            if (sp.contains("forced_hits"))
                w.spec.forcedHits = sp["forced_hits"].get<std::vector<bool>>();
        }
        if (doc.contains("tool"))
        {
            auto const& t = doc["tool"];
            reject_unknown(t, { "mean", "stddev" }, "tool");
            if (t.contains("mean"))
                s.toolMeans = number_list<double>(t["mean"], "tool.mean");
            w.tool.stddev = number(t, "stddev", 0.0);
        }
        if (doc.contains("prices"))
        {
            auto const& p = doc["prices"];
            reject_unknown(p, { "main_input", "main_output", "spec_input", "spec_output", "spec_input_discount" },
                           "prices");
            PriceSheet sheet;
            for (auto const* key: { "main_input", "main_output", "spec_input", "spec_output" })
                if (!p.contains(key))
                    throw Error(Errc::ConfigError, fmt::format("prices: missing '{}'", key));
            sheet.mainInput = number(p, "main_input", 0);
            sheet.mainOutput = number(p, "main_output", 0);
            sheet.specInput = number(p, "spec_input", 0);
            sheet.specOutput = number(p, "spec_output", 0);
            sheet.specInputDiscount = number(p, "spec_input_discount", 0);
            sheet.validate();
            w.prices = sheet;
        }
        s.library = doc.value("library", s.library);
        if (s.library != "synthetic" && s.library != "two_turn")
            throw Error(Errc::ConfigError, fmt::format("unknown library '{}'", s.library));
        if (doc.contains("tasks") != doc.contains("fixtures"))
            throw Error(Errc::ConfigError, "'tasks' and 'fixtures' go together");
        if (doc.contains("tasks"))
        {
            s.tasksFile = baseDir / doc["tasks"].get<std::string>();
            s.fixturesFile = baseDir / doc["fixtures"].get<std::string>();
        }
    }
    catch (const json::exception& e)
    {
        throw Error(Errc::ConfigError, fmt::format("scenario: {}", e.what()));
    }
    if (s.repetitions < 1)
        throw Error(Errc::ConfigError, "repetitions must be at least 1");
    if (s.modes.empty())
        throw Error(Errc::ConfigError, "no modes selected");
    if (auto const seed = env_seed())
        w.seed = *seed;
    return s;
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::ConfigError, fmt::format("cannot open scenario '{}'", path.string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str(), path.parent_path());
}

TaskLibrary scenario_library(const Scenario& scenario)
{
    if (scenario.tasksFile)
        return load_library(*scenario.tasksFile, *scenario.fixturesFile);
    return scenario.library == "two_turn" ? two_turn_library() : synthetic_library();
}

std::vector<ResultRow> run_scenario(const Scenario& scenario, const TaskLibrary& library, std::ostream* log,
                                    std::ostream* outcomes)
{
    std::vector<ResultRow> rows;
    for (auto agents: scenario.agents)
        for (double alpha: scenario.alphas)
            for (auto lambda: scenario.lambdas)
                for (double toolMean: scenario.toolMeans)
                    for (std::size_t rep = 0; rep < scenario.repetitions; ++rep)
                    {
                        auto config = scenario.base;
                        config.agents = agents;
                        config.spec.accuracy = alpha;
                        config.spec.samples = lambda;
                        config.tool.mean = toolMean;
                        config.seed = derive_seed(scenario.base.seed, { rep });

                        auto const point = fmt::format("agents={} alpha={} lambda={} tool_mean={} rep={}", agents,
                                                       alpha, lambda, toolMean, rep);
                        auto const run = [&](Mode mode) {
                            config.mode = mode;
                            if (log)
                                *log << fmt::format("# run mode={} {}\n", to_string(mode), point);
                            auto result = run_workload(config, library, log);
                            if (outcomes)
                                for (auto const& agent: result.agents)
                                {
                                    *outcomes << fmt::format("# run mode={} {}\n", to_string(mode), point);
                                    write_outcomes(*outcomes, agent.tasks);
                                }
                            return result;
                        };
                        auto const baseline = run(Mode::Baseline);
                        for (auto mode: scenario.modes)
                        {
                            auto const result = mode == Mode::Baseline ? baseline : run(mode);
                            rows.push_back(ResultRow {
                                .mode = mode,
                                .agents = agents,
                                .alpha = alpha,
                                .lambda = lambda,
                                .toolMean = toolMean,
                                .rep = rep,
                                .throughput = result.metrics.throughput,
                                .timeSavedPct = paired_time_saved(baseline, result),
                                .hitRate = result.metrics.hitRate,
                                .extraCost = result.metrics.extraCost,
                                .engineWindow = result.metrics.engineWindow,
                            });
                        }
                    }
    return rows;
}

void write_results_csv(std::ostream& out, std::span<const ResultRow> rows)
{
    out << kResultsHeader << '\n';
    for (auto const& r: rows)
        out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", to_string(r.mode), r.agents, format_number(r.alpha),
                           r.lambda, format_number(r.toolMean), r.rep, csv_number(r.throughput),
                           csv_number(r.timeSavedPct), csv_number(r.hitRate),
                           r.extraCost ? csv_number(*r.extraCost) : std::string());
}

} // namespace spectool
