// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scripted agent tasks: how many tokens each turn reasons for, which tool it
// calls, and the fixture output each call returns.

#include <spectool/core.hpp>
#include <spectool/mock_lm.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace spectool
{

struct TaskStep
{
    std::size_t reasoningTokens = 0;
    ToolCall call;
};

struct TaskDef
{
    std::string id;
    std::size_t promptTokens = 0;
    std::vector<TaskStep> steps;
    std::size_t finalTokens = 1; // TEXT tokens of the answer, before EOS
};

struct TaskLibrary
{
    Toolset tools;
    std::vector<TaskDef> tasks;
    FixtureMap fixtures;

    /// Throws ConfigError when a call has no fixture, names an unknown tool,
    /// or the library is empty.
    void validate() const;
};

/// Timing attached to the scripts built from a library.
struct ScriptTiming
{
    std::optional<double> fixedLatency;
    double prefillRate = 0.001;
    double decodeRate = 0.02;
};

[[nodiscard]] std::shared_ptr<const GenerationScript> build_script(const TaskDef& task, const ScriptTiming& timing);

/// 64 tasks with 1-5 tool turns over cheap stateless tools. Reasoning is
/// 80-120 tokens per turn, calls 12-28 tokens, outputs 40-240 tokens.
[[nodiscard]] TaskLibrary synthetic_library(std::size_t count = 64, std::uint64_t seed = 2025);

/// Two tool turns of R=100, t=20, t_o=200 over a 1000-token prompt.
[[nodiscard]] TaskLibrary two_turn_library();

/// tasks.json holds tools and tasks; fixtures.json maps key hex to output.
void save_tasks(const std::filesystem::path& path, const TaskLibrary& library);
[[nodiscard]] TaskLibrary load_library(const std::filesystem::path& tasks, const std::filesystem::path& fixtures);

} // namespace spectool
