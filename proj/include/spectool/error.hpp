// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spectool
{

enum class Errc
{
    InvalidCall,
    NoToolCall,
    MalformedToolCall,
    InvalidScenario,
    LemmaHypothesisViolated,
    EmptyGrid,
    InvalidDelay,
    ScriptExhausted,
    UnknownTool,
    ConfigError,
    InvalidBaseline,
    InvalidWindow,
    SimulationError,
};

std::string_view to_string(Errc code) noexcept;

class Error: public std::runtime_error
{
  public:
    Error(Errc code, const std::string& message);

    [[nodiscard]] Errc code() const noexcept { return _code; }

  private:
    Errc _code;
};

} // namespace spectool
