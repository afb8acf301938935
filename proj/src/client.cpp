// SPDX-License-Identifier: Apache-2.0
#include <spectool/client.hpp>

#include <json.hpp>

#include <fmt/format.h>

namespace spectool
{

namespace
{

constexpr std::uint64_t kSpecPurpose = 0x5bec;

} // namespace

const char* to_string(Mode mode) noexcept
{
    switch (mode)
    {
    case Mode::Baseline: return "baseline";
    case Mode::ClientSpec: return "client_spec";
    case Mode::EngineSpec: return "engine_spec";
    }
    return "?";
}

Mode parse_mode(std::string_view text)
{
    for (auto mode: { Mode::Baseline, Mode::ClientSpec, Mode::EngineSpec })
        if (text == to_string(mode))
            return mode;
    throw Error(Errc::ConfigError, fmt::format("unknown mode '{}'", text));
}

Agent::Agent(sim::Kernel& kernel, AgentConfig config, MainEndpoint& endpoint, ToolRuntime& tools,
             std::vector<TaskSpec> tasks)
    : _kernel(kernel), _config(std::move(config)), _endpoint(endpoint), _tools(tools), _tasks(std::move(tasks))
{
    if (_config.mode != Mode::Baseline)
        _config.spec.validate();
    if (_config.mode == Mode::EngineSpec && !_endpoint.accepts_tool_cache())
        throw Error(Errc::ConfigError, "engine mode needs an endpoint with a tool cache");
    for (auto const& t: _tasks)
    {
        if (!t.script)
            throw Error(Errc::ConfigError, fmt::format("task {} has no script", t.taskId));
        t.script->validate();
    }
}

void Agent::start()
{
    if (_tasks.empty())
        return;
    _kernel.schedule(0, fmt::format("agent{}.start", _config.agent), [this] { begin_task(0); });
}

TurnOutcome& Agent::outcome()
{
    return _cur.result.turns.back();
}

std::uint64_t Agent::tool_seed(const CanonicalKey& key) const
{
    return derive_seed(_config.seed, { _config.agent, task().taskId, _cur.turn, fnv1a(key.bytes()) });
}

void Agent::begin_task(std::size_t index)
{
    auto const epoch = _cur.epoch;
    _cur = Current {};
    _cur.epoch = epoch;
    _cur.index = index;
    _cur.history = task().script->promptTokens;
    _cur.result.taskId = task().taskId;
    _cur.result.session = task().session;
    _cur.result.startedAt = _kernel.now();
    _cur.result.transcript.push_back(Turn::user(task().session));
    dispatch_turn();
}

void Agent::dispatch_turn()
{
    MainHandlers handlers;
    handlers.onReply = [this](MainReply reply) { on_reply(std::move(reply)); };
    if (_config.mode == Mode::EngineSpec)
        handlers.onIngest = [this](Ingestion note) { on_ingest(std::move(note)); };
    _cur.rid = _endpoint.call(MainCall { task().script, _cur.turn, _cur.history, task().session }, std::move(handlers));
    ++_cur.result.usage.mainCalls;
    _cur.result.usage.mainInput += _cur.history;
    open_turn();
}

void Agent::open_turn()
{
    TurnOutcome o;
    o.task = _cur.index;
    o.turnIndex = _cur.turn;
    o.startedAt = _kernel.now();
    _cur.result.turns.push_back(o);
    ++_cur.epoch;
    _cur.pending.clear();
    _cur.awaiting.reset();
    _cur.awaitingCall.reset();
    speculate();
}

void Agent::speculate()
{
    auto const& turn = scripted(_cur.turn);
    if (_config.mode == Mode::Baseline || turn.final())
        return;
    if (_config.toolset && !_config.toolset->speculatable(turn.call->name))
        return;
    std::optional<bool> forced;
    if (!_config.spec.forcedHits.empty())
        forced = _config.spec.forcedHits[_speculatedTurns % _config.spec.forcedHits.size()];
    ++_speculatedTurns;
    outcome().speculated = true;

    auto const seed = derive_seed(_config.seed, { _config.agent, task().taskId, _cur.turn, kSpecPurpose });
    auto samples = spectool::speculate(_config.spec, *turn.call, seed, _kernel.now(), forced);
    auto& usage = _cur.result.usage;
    for (auto& sample: samples)
    {
        ++usage.specCalls;
        usage.specInput += _cur.history;
        usage.specOutput += render(sample.call).size();
        _kernel.schedule(_config.specOverhead + _config.spec.latency, fmt::format("agent{}.spec", _config.agent),
                         [this, epoch = _cur.epoch, sample = std::move(sample)]() mutable {
                             on_sample(epoch, std::move(sample));
                         });
    }
}

void Agent::on_sample(std::uint64_t epoch, SpecSample sample)
{
    if (epoch != _cur.epoch)
        return;
    auto& o = outcome();
    if (!o.specDoneAt)
        o.specDoneAt = _kernel.now();

    // A sample that cannot be keyed or executed is a miss, nothing more.
    std::string output;
    CanonicalKey key;
    try
    {
        key = canonical_key(sample.call);
        if (_cur.pending.contains(key))
            return;
        output = _tools.output(sample.call);
    }
    catch (const Error&)
    {
        return;
    }
    auto const run = _tools.run(sample.call, tool_seed(key));
    _cur.pending.emplace(key, Pending {});
    _kernel.schedule(run.duration, fmt::format("agent{}.spec-tool", _config.agent),
                     [this, epoch, key, call = std::move(sample.call), output = std::move(output)]() mutable {
                         on_tool_done(epoch, std::move(key), std::move(call), std::move(output), true);
                     });
}

void Agent::on_tool_done(std::uint64_t epoch, CanonicalKey key, ToolCall call, std::string output, bool speculative)
{
    if (epoch != _cur.epoch)
        return;
    auto& p = _cur.pending[key];
    p.done = true;
    p.output = output;
    p.doneAt = _kernel.now();
    if (speculative && _config.mode == Mode::EngineSpec)
        _endpoint.submit_tool_cache(_cur.rid, CacheSubmit { key, call.name, render(call), output, std::nullopt });
    if (_cur.awaiting && *_cur.awaiting == key)
    {
        _cur.awaiting.reset();
        outcome().toolDoneAt = p.doneAt;
        auto const main = *_cur.awaitingCall;
        _cur.awaitingCall.reset();
        finish_tool_turn(main, output);
    }
}

void Agent::on_reply(MainReply reply)
{
    if (reply.turn != _cur.turn)
        throw Error(Errc::SimulationError,
                    fmt::format("agent {} got a reply for turn {} while on turn {}", _config.agent, reply.turn, _cur.turn));
    auto& o = outcome();
    o.mainDoneAt = _kernel.now();
    o.tokensEmitted = reply.tokens.size();
    _cur.result.tokens += reply.tokens.size();
    _cur.result.usage.mainOutput += reply.tokens.size();
    _cur.result.transcript.push_back(Turn::assistant(render_text(reply.tokens)));

    if (!has_tool_call(reply.tokens))
    {
        o.turnDoneAt = _kernel.now();
        auto& r = _cur.result;
        r.finishedAt = _kernel.now();
        r.toolPhaseEnd = r.startedAt;
        for (auto const& t: r.turns)
            if (t.toolCall)
                r.toolPhaseEnd = t.turnDoneAt;
        ++_cur.epoch;
        _results.push_back(std::move(_cur.result));
        if (_cur.index + 1 < _tasks.size())
            begin_task(_cur.index + 1);
        return;
    }

    auto call = extract_tool_call(reply.tokens);
    o.toolCall = true;
    auto key = canonical_key(call);
    if (auto const it = _cur.pending.find(key); it != _cur.pending.end())
    {
        o.hit = true;
        if (it->second.done)
        {
            o.toolDoneAt = it->second.doneAt;
            auto const output = it->second.output;
            finish_tool_turn(call, output);
        }
        else
        {
            _cur.awaiting = std::move(key);
            _cur.awaitingCall = std::move(call);
        }
        return;
    }

    std::string output;
    try
    {
        output = _tools.output(call);
    }
    catch (const Error& e)
    {
        throw Error(e.code(), fmt::format("task {} turn {}: {}", task().taskId, _cur.turn, e.what()));
    }
    auto const run = _tools.run(call, tool_seed(key));
    _cur.pending.emplace(key, Pending {});
    _cur.awaiting = key;
    _cur.awaitingCall = call;
    _kernel.schedule(run.duration, fmt::format("agent{}.tool", _config.agent),
                     [this, epoch = _cur.epoch, key, call, output = std::move(output)]() mutable {
                         on_tool_done(epoch, std::move(key), std::move(call), std::move(output), false);
                     });
}

void Agent::on_ingest(Ingestion note)
{
    if (note.turn != _cur.turn)
        throw Error(Errc::SimulationError, fmt::format("agent {} got an ingest notice for turn {} while on turn {}",
                                                       _config.agent, note.turn, _cur.turn));
    auto& o = outcome();
    o.toolCall = true;
    o.hit = true;
    o.ingested = true;
    o.mainDoneAt = _kernel.now();
    o.tokensEmitted = note.tokens.size();
    if (auto const it = _cur.pending.find(canonical_key(note.call)); it != _cur.pending.end() && it->second.done)
        o.toolDoneAt = it->second.doneAt;
    _cur.result.tokens += note.tokens.size();
    _cur.result.usage.mainOutput += note.tokens.size();
    _cur.result.transcript.push_back(Turn::assistant(render_text(note.tokens)));
    _cur.result.transcript.push_back(Turn::tool(note.call, note.output));
    _cur.history += render(note.call).size() + text_token_count(note.output.size());
    o.turnDoneAt = _kernel.now();
    ++_cur.turn;
    open_turn();
}

void Agent::finish_tool_turn(const ToolCall& call, const std::string& output)
{
    _cur.result.transcript.push_back(Turn::tool(call, output));
    _cur.history += render(call).size() + text_token_count(output.size());
    outcome().turnDoneAt = _kernel.now();
    ++_cur.turn;
    dispatch_turn();
}

TaskResult run_task(sim::Kernel& kernel, AgentConfig config, MainEndpoint& endpoint, ToolRuntime& tools,
                    TaskSpec task)
{
    Agent agent(kernel, std::move(config), endpoint, tools, { std::move(task) });
    agent.start();
    kernel.run_until_idle();
    if (!agent.done())
        throw Error(Errc::SimulationError, "agent stalled before finishing its task");
    return agent.results().front();
}

void write_outcomes(std::ostream& out, std::span<const TaskResult> results)
{
    auto const optional = [](const std::optional<sim::Seconds>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    for (auto const& r: results)
        for (auto const& t: r.turns)
        {
            nlohmann::ordered_json line;
            line["task_id"] = r.taskId;
            line["turn_index"] = t.turnIndex;
            line["tool_call"] = t.toolCall;
            line["speculated"] = t.speculated;
            line["hit"] = t.hit;
            line["ingested"] = t.ingested;
            line["started_at"] = t.startedAt;
            line["main_done_at"] = t.mainDoneAt;
            line["spec_done_at"] = optional(t.specDoneAt);
            line["tool_done_at"] = optional(t.toolDoneAt);
            line["turn_done_at"] = t.turnDoneAt;
            line["tokens_emitted"] = t.tokensEmitted;
            out << line.dump() << '\n';
        }
}

} // namespace spectool
