// SPDX-License-Identifier: Apache-2.0
#include <spectool/tasks.hpp>

#include <json.hpp>

#include <fmt/format.h>
#include <fstream>
#include <set>

namespace spectool
{

namespace
{

using json = nlohmann::ordered_json;

/// Small deterministic generator; the standard distributions are not
/// portable across library implementations.
class Draw
{
  public:
    explicit Draw(std::uint64_t seed): _state(seed) {}

    std::size_t between(std::size_t lo, std::size_t hi)
    {
        _state = derive_seed(_state, { 1 });
        return lo + static_cast<std::size_t>(_state % (hi - lo + 1));
    }

  private:
    std::uint64_t _state;
};

struct ToolShape
{
    const char* name;
    std::vector<const char*> params;
};

const std::vector<ToolShape>& shapes()
{
    static const std::vector<ToolShape> kShapes {
        { "web_search", { "query" } },
        { "get_weather", { "city", "unit" } },
        { "lookup_stock", { "ticker" } },
        { "calculator", { "expression" } },
        { "read_document", { "doc_id", "section" } },
        { "get_time", { "timezone" } },
    };
    return kShapes;
}

/// Grows the first argument until the call renders to `target` tokens.
ToolCall shaped_call(const ToolShape& shape, std::size_t task, std::size_t step, std::size_t target)
{
    ToolCall call { shape.name, {} };
    for (auto const* p: shape.params)
        call.args.emplace_back(p, fmt::format("{}-{}-{}", p, task, step));
    auto& first = std::get<std::string>(call.args.front().second);
    while (render(call).size() < target)
        first.push_back('x');
    return call;
}

json scalar_json(const Scalar& v)
{
    return std::visit([](auto const& x) -> json { return json(x); }, v);
}

Scalar json_scalar(const json& v)
{
    if (v.is_null())
        return nullptr;
    if (v.is_boolean())
        return v.get<bool>();
    if (v.is_number())
        return v.get<double>();
    if (v.is_string())
        return v.get<std::string>();
    throw Error(Errc::ConfigError, "call arguments must be scalars");
}

const char* kind_name(ScalarKind kind)
{
    switch (kind)
    {
    case ScalarKind::Null: return "null";
    case ScalarKind::Boolean: return "boolean";
    case ScalarKind::Number: return "number";
    case ScalarKind::String: return "string";
    }
    return "?";
}

ScalarKind parse_kind(const std::string& text)
{
    for (auto k: { ScalarKind::Null, ScalarKind::Boolean, ScalarKind::Number, ScalarKind::String })
        if (text == kind_name(k))
            return k;
    throw Error(Errc::ConfigError, fmt::format("unknown parameter kind '{}'", text));
}

json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::ConfigError, fmt::format("cannot open '{}'", path.string()));
    try
    {
        return json::parse(in);
    }
    catch (const json::exception& e)
    {
        throw Error(Errc::ConfigError, fmt::format("'{}': {}", path.string(), e.what()));
    }
}

} // namespace

void TaskLibrary::validate() const
{
    if (tasks.empty())
        throw Error(Errc::ConfigError, "task library is empty");
    for (auto const& task: tasks)
        for (auto const& step: task.steps)
        {
            if (!tools.find(step.call.name))
                throw Error(Errc::ConfigError, fmt::format("task {} calls unknown tool '{}'", task.id, step.call.name));
            if (!fixtures.contains(canonical_key(step.call)))
                throw Error(Errc::ConfigError,
                            fmt::format("task {}: no fixture for {}", task.id, render_payload(step.call)));
        }
}

std::shared_ptr<const GenerationScript> build_script(const TaskDef& task, const ScriptTiming& timing)
{
    auto script = std::make_shared<GenerationScript>();
    script->promptTokens = task.promptTokens;
    script->prefillRate = timing.prefillRate;
    script->decodeRate = timing.decodeRate;
    script->fixedLatency = timing.fixedLatency;
    for (auto const& step: task.steps)
        script->turns.push_back(make_tool_turn(step.reasoningTokens, step.call));
    script->turns.push_back(make_final_turn(task.finalTokens));
    script->validate();
    return script;
}

TaskLibrary synthetic_library(std::size_t count, std::uint64_t seed)
{
    TaskLibrary lib;
    std::vector<ToolSpec> specs;
    for (auto const& shape: shapes())
    {
        ToolSpec spec { shape.name, {}, true, CostClass::Cheap };
        for (auto const* p: shape.params)
            spec.params.push_back({ p, ScalarKind::String });
        specs.push_back(std::move(spec));
    }
    lib.tools = Toolset(std::move(specs));

    Draw draw(seed);
    for (std::size_t i = 0; i < count; ++i)
    {
        TaskDef task;
        task.id = fmt::format("task-{:03d}", i);
        task.promptTokens = draw.between(400, 1200);
        task.finalTokens = draw.between(20, 60);
        auto const steps = 1 + i % 5;
        for (std::size_t s = 0; s < steps; ++s)
        {
            auto const& shape = shapes()[draw.between(0, shapes().size() - 1)];
            TaskStep step { draw.between(80, 120), shaped_call(shape, i, s, draw.between(12, 28)) };
            lib.fixtures.emplace(canonical_key(step.call),
                                 output_with_token_count(draw.between(40, 240), fmt::format("{}#{} ", task.id, s)));
            task.steps.push_back(std::move(step));
        }
        lib.tasks.push_back(std::move(task));
    }
    return lib;
}

TaskLibrary two_turn_library()
{
    TaskLibrary lib;
    lib.tools = Toolset({ { "search", { { "q", ScalarKind::String } }, true, CostClass::Cheap },
                          { "lookup", { { "q", ScalarKind::String } }, true, CostClass::Cheap } });
    TaskDef task;
    task.id = "two-turn";
    task.promptTokens = 1000;
    task.finalTokens = 20;
    for (auto const* name: { "search", "lookup" })
    {
        TaskStep step { 100, call_with_token_count(name, "q", 20) };
        lib.fixtures.emplace(canonical_key(step.call), output_with_token_count(200, name));
        task.steps.push_back(std::move(step));
    }
    lib.tasks.push_back(std::move(task));
    return lib;
}

void save_tasks(const std::filesystem::path& path, const TaskLibrary& library)
{
    json doc;
    doc["tools"] = json::array();
    for (auto const& tool: library.tools.tools())
    {
        json params = json::array();
        for (auto const& p: tool.params)
            params.push_back({ { "name", p.name }, { "kind", kind_name(p.kind) } });
        doc["tools"].push_back({ { "name", tool.name },
                                 { "params", params },
                                 { "stateless", tool.stateless },
                                 { "cost", tool.costClass == CostClass::Cheap ? "cheap" : "expensive" } });
    }
    doc["tasks"] = json::array();
    for (auto const& task: library.tasks)
    {
        json steps = json::array();
        for (auto const& step: task.steps)
        {
            json args = json::object();
            for (auto const& [k, v]: step.call.args)
                args[k] = scalar_json(v);
            steps.push_back({ { "reasoning_tokens", step.reasoningTokens },
                              { "call", { { "name", step.call.name }, { "args", args } } } });
        }
        doc["tasks"].push_back({ { "id", task.id },
                                 { "prompt_tokens", task.promptTokens },
                                 { "final_tokens", task.finalTokens },
                                 { "steps", steps } });
    }
    std::ofstream out(path);
    if (!out)
        throw Error(Errc::ConfigError, fmt::format("cannot write '{}'", path.string()));
    out << doc.dump(2) << '\n';
}

TaskLibrary load_library(const std::filesystem::path& tasksPath, const std::filesystem::path& fixturesPath)
{
    auto const doc = read_json(tasksPath);
    TaskLibrary lib;
    try
    {
        std::vector<ToolSpec> tools;
        for (auto const& t: doc.at("tools"))
        {
            ToolSpec spec;
            spec.name = t.at("name").get<std::string>();
            auto const params = t.value("params", json::array());
            for (auto const& p: params)
                spec.params.push_back({ p.at("name").get<std::string>(), parse_kind(p.value("kind", "string")) });
            spec.stateless = t.value("stateless", true);
            auto const cost = t.value("cost", std::string("cheap"));
            if (cost != "cheap" && cost != "expensive")
                throw Error(Errc::ConfigError, fmt::format("tool {}: unknown cost class '{}'", spec.name, cost));
            spec.costClass = cost == "cheap" ? CostClass::Cheap : CostClass::Expensive;
            tools.push_back(std::move(spec));
        }
        lib.tools = Toolset(std::move(tools));
        std::set<std::string> ids;
        for (auto const& t: doc.at("tasks"))
        {
            TaskDef task;
            task.id = t.at("id").get<std::string>();
            if (!ids.insert(task.id).second)
                throw Error(Errc::ConfigError, fmt::format("duplicate task id '{}'", task.id));
            task.promptTokens = t.at("prompt_tokens").get<std::size_t>();
            task.finalTokens = t.value("final_tokens", std::size_t { 1 });
            for (auto const& s: t.at("steps"))
            {
                TaskStep step;
                step.reasoningTokens = s.at("reasoning_tokens").get<std::size_t>();
                step.call.name = s.at("call").at("name").get<std::string>();
                auto const args = s.at("call").value("args", json::object());
                for (auto const& [k, v]: args.items())
                    step.call.args.emplace_back(k, json_scalar(v));
                task.steps.push_back(std::move(step));
            }
            lib.tasks.push_back(std::move(task));
        }
    }
    catch (const json::exception& e)
    {
        throw Error(Errc::ConfigError, fmt::format("'{}': {}", tasksPath.string(), e.what()));
    }
    lib.fixtures = load_fixtures(fixturesPath);
    lib.validate();
    return lib;
}

} // namespace spectool
