// SPDX-License-Identifier: Apache-2.0
#include <spectool/engine.hpp>

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace spectool
{

void EngineConfig::validate() const
{
    if (batchSize < 1)
        throw Error(Errc::ConfigError, "batch size must be at least 1");
    if (!(prefillRate > 0 && decodeRate > 0 && std::isfinite(prefillRate) && std::isfinite(decodeRate)))
        throw Error(Errc::ConfigError, "prefill and decode rates must be positive");
    if (!(overhead >= 0 && std::isfinite(overhead)))
        throw Error(Errc::ConfigError, "overhead must be non-negative");
}

DraftValidation validate_draft(std::span<const Token> draft, std::span<const Token> scripted)
{
    auto const [d, s] = std::mismatch(draft.begin(), draft.end(), scripted.begin(), scripted.end());
    DraftValidation result;
    result.accepted = static_cast<std::size_t>(d - draft.begin());
    if (s != scripted.end())
        result.next = *s;
    return result;
}

const char* to_string(SeqStatus status) noexcept
{
    switch (status)
    {
    case SeqStatus::New: return "NEW";
    case SeqStatus::Decode: return "DECODE";
    case SeqStatus::WaitingTool: return "WAITING_TOOL";
    case SeqStatus::Done: return "DONE";
    }
    return "?";
}

namespace
{

sim::Seconds window_end(const SessionMarks& m, std::optional<sim::Seconds> TurnMarks::*field)
{
    if (!m.start)
        throw Error(Errc::SimulationError, "session has not reached the engine");
    if (m.turns.empty())
        return 0;
    auto const& last = m.turns.back().*field;
    if (!last)
        throw Error(Errc::SimulationError, "last tool turn has no result mark yet");
    return *last - *m.start;
}

} // namespace

sim::Seconds SessionMarks::arrived_window() const
{
    return window_end(*this, &TurnMarks::resultArrived);
}

sim::Seconds SessionMarks::resident_window() const
{
    return window_end(*this, &TurnMarks::resultResident);
}

Engine::Engine(sim::Kernel& kernel, EngineConfig config): _kernel(kernel), _config(config)
{
    _config.validate();
}

ResponseId Engine::submit_request(EngineRequest request, EngineEvents events)
{
    if (!request.script)
        throw Error(Errc::ConfigError, "engine request without a script");
    if (request.turn >= request.script->turns.size())
        throw Error(Errc::ScriptExhausted, fmt::format("request starts at turn {} of a {}-turn script", request.turn,
                                                       request.script->turns.size()));
    auto rid = fmt::format("resp-{:06d}", _nextId++);
    Sequence s;
    s.info.rid = rid;
    s.info.session = request.session;
    s.turn = request.turn;
    s.history = request.historyTokens;
    s.request = std::move(request);
    s.events = std::move(events);
    _sequences.emplace(rid, std::move(s));
    _kernel.schedule(_config.overhead, fmt::format("engine.arrive {}", rid), [this, rid] { arrive(rid); });
    return rid;
}

std::size_t Engine::submit_tool_cache(const ResponseId& rid, CacheSubmit entry)
{
    _kernel.schedule(_config.overhead, fmt::format("engine.cache-submit {}", rid),
                     [this, rid, entry = std::move(entry)]() mutable { accept_submission(rid, std::move(entry)); });
    return 1;
}

std::size_t Engine::accept_submission(const ResponseId& rid, CacheSubmit entry)
{
    auto const it = _sequences.find(rid);
    if (it != _sequences.end()
        && (it->second.info.status == SeqStatus::Done || it->second.info.status == SeqStatus::WaitingTool))
        return 1;
    return _store.submit(rid, std::move(entry), _kernel.now());
}

const SequenceInfo* Engine::sequence(const ResponseId& rid) const
{
    auto const it = _sequences.find(rid);
    return it == _sequences.end() ? nullptr : &it->second.info;
}

const SessionMarks* Engine::marks(const std::string& session) const
{
    auto const it = _sessions.find(session);
    return it == _sessions.end() ? nullptr : &it->second.marks;
}

Engine::Sequence& Engine::seq(const ResponseId& rid)
{
    return _sequences.at(rid);
}

TurnMarks& Engine::mark(const std::string& session, std::size_t turn)
{
    auto& turns = _sessions[session].marks.turns;
    if (turns.size() <= turn)
        turns.resize(turn + 1);
    return turns[turn];
}

void Engine::log(const Sequence& s, const char* phase, std::size_t tokens)
{
    if (_log)
        *_log << fmt::format("t={:.9f} rid={} phase={} tokens={}\n", _kernel.now(), s.info.rid, phase, tokens);
}

void Engine::after(sim::Seconds delay, const ResponseId& rid, const char* what, std::function<void(Sequence&)> next)
{
    _kernel.schedule(delay, fmt::format("engine.{} {}", what, rid),
                     [this, rid, next = std::move(next)] { next(seq(rid)); });
}

void Engine::arrive(const ResponseId& rid)
{
    auto& s = seq(rid);
    auto& session = _sessions[s.info.session];
    if (!session.marks.start)
        session.marks.start = _kernel.now();
    if (s.turn > 0)
        mark(s.info.session, s.turn - 1).resultArrived = _kernel.now();
    if (_resident < _config.batchSize)
        admit(rid);
    else
        _queue.push_back(rid);
}

void Engine::admit(const ResponseId& rid)
{
    ++_resident;
    auto& s = seq(rid);
    auto const retained = _config.prefixCache ? std::min(_sessions[s.info.session].retained, s.history) : 0;
    auto const fresh = s.history - retained;
    s.info.cachedPrefix = retained;
    log(s, "prefill", fresh);
    after(_config.prefillRate * static_cast<double>(fresh), rid, "prefill", [this, fresh](Sequence& s) {
        s.info.prefilled += fresh;
        s.info.kvTokens = s.info.cachedPrefix + s.info.prefilled;
        if (s.turn > 0)
            mark(s.info.session, s.turn - 1).resultResident = _kernel.now();
        s.info.status = SeqStatus::Decode;
        start_turn(s);
    });
}

void Engine::release()
{
    --_resident;
    if (!_queue.empty())
    {
        auto const next = _queue.front();
        _queue.pop_front();
        admit(next);
    }
}

void Engine::start_turn(Sequence& s)
{
    auto const& turn = s.request.script->turns.at(s.turn);
    if (turn.final())
    {
        auto const n = turn.tokens.size();
        log(s, "decode", n);
        after(_config.decodeRate * static_cast<double>(n), s.info.rid, "decode", [this, n](Sequence& s) {
            s.info.decoded += n;
            s.info.kvTokens += n;
            finish(s);
        });
        return;
    }
    auto const r = turn.reasoningTokens;
    if (r > 0)
        log(s, "decode", r);
    after(_config.decodeRate * static_cast<double>(r), s.info.rid, "decode", [this, r](Sequence& s) {
        s.info.decoded += r;
        s.info.kvTokens += r;
        at_tool_start(s);
    });
}

void Engine::at_tool_start(Sequence& s)
{
    auto const& turn = s.request.script->turns.at(s.turn);
    auto const span = turn.callSpan();
    auto const t = span.size();
    const CacheEntry* draft = nullptr;
    // The tool name is the first token inside the span.
    if (_config.toolCache && span.size() > 1 && span[1].kind == TokenKind::Text)
        draft = _store.lookup_name(s.info.rid, span[1].text, _kernel.now());
    if (!draft || draft->callTokens.empty())
    {
        decode_call_rest(s, t);
        return;
    }
    auto const check = validate_draft(draft->callTokens, span);
    auto const accepted = std::min(check.accepted + 1, t);
    auto const cost = _config.verifyCost == VerifyCost::SinglePass
                        ? _config.decodeRate
                        : _config.decodeRate * static_cast<double>(draft->callTokens.size());
    log(s, "validate", accepted);
    after(cost, s.info.rid, "validate", [this, accepted, t](Sequence& s) {
        ++s.info.validations;
        s.info.decoded += accepted;
        s.info.kvTokens += accepted;
        decode_call_rest(s, t - accepted);
    });
}

void Engine::decode_call_rest(Sequence& s, std::size_t remaining)
{
    if (remaining > 0)
        log(s, "decode", remaining);
    after(_config.decodeRate * static_cast<double>(remaining), s.info.rid, "decode", [this, remaining](Sequence& s) {
        s.info.decoded += remaining;
        s.info.kvTokens += remaining;
        at_tool_end(s);
    });
}

void Engine::at_tool_end(Sequence& s)
{
    auto const& turn = s.request.script->turns.at(s.turn);
    s.info.emitted.insert(s.info.emitted.end(), turn.tokens.begin(), turn.tokens.end());
    if (!_config.toolCache)
    {
        emit_and_evict(s);
        return;
    }
    auto const* hit = _store.lookup_key(s.info.rid, canonical_key(*turn.call), _kernel.now());
    if (!hit)
    {
        emit_and_evict(s);
        return;
    }

    auto const lookupAt = _kernel.now();
    auto& m = mark(s.info.session, s.turn);
    m.resultArrived = lookupAt;
    m.ingested = true;
    auto const block = turn.callTokens() + hit->outputTokens();
    auto output = hit->output;
    log(s, "ingest", block);
    after(_config.prefillRate * static_cast<double>(block), s.info.rid, "ingest",
          [this, block, lookupAt, output = std::move(output)](Sequence& s) mutable {
              auto const& turn = s.request.script->turns.at(s.turn);
              ++s.info.ingests;
              s.info.injected += block;
              s.info.kvTokens += block;
              s.history += block;
              _sessions[s.info.session].retained = s.history;
              mark(s.info.session, s.turn).resultResident = _kernel.now();
              if (s.events.onIngest)
              {
                  Ingestion note { s.info.rid, s.turn, turn.tokens, *turn.call, std::move(output), lookupAt,
                                   _kernel.now() };
                  _kernel.schedule(_config.overhead, fmt::format("client.ingest-notice {}", s.info.rid),
                                   [cb = s.events.onIngest, note = std::move(note)]() mutable { cb(std::move(note)); });
              }
              ++s.turn;
              start_turn(s);
          });
}

void Engine::emit_and_evict(Sequence& s)
{
    auto const& turn = s.request.script->turns.at(s.turn);
    log(s, "emit", turn.tokens.size());
    log(s, "evict", s.info.kvTokens);
    ++s.info.evictions;
    s.info.kvTokens = 0;
    s.info.status = SeqStatus::WaitingTool;
    if (_config.prefixCache)
        _sessions[s.info.session].retained = s.history;
    _store.purge(s.info.rid);
    if (s.events.onEmit)
    {
        Emission out { s.info.rid, s.turn, turn.tokens, _kernel.now() };
        _kernel.schedule(_config.overhead, fmt::format("client.emit {}", s.info.rid),
                         [cb = s.events.onEmit, out = std::move(out)]() mutable { cb(std::move(out)); });
    }
    release();
}

void Engine::finish(Sequence& s)
{
    auto const& turn = s.request.script->turns.at(s.turn);
    s.info.emitted.insert(s.info.emitted.end(), turn.tokens.begin(), turn.tokens.end());
    log(s, "emit", turn.tokens.size());
    s.info.status = SeqStatus::Done;
    s.info.kvTokens = 0;
    _store.purge(s.info.rid);
    if (s.events.onEmit)
    {
        Emission out { s.info.rid, s.turn, turn.tokens, _kernel.now() };
        _kernel.schedule(_config.overhead, fmt::format("client.emit {}", s.info.rid),
                         [cb = s.events.onEmit, out = std::move(out)]() mutable { cb(std::move(out)); });
    }
    release();
}

} // namespace spectool
