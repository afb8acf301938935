// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dependency-free SVG charts for sweep and results CSVs. Output depends only
// on the CSV bytes, so identical inputs give identical files.

#include <string>
#include <string_view>
#include <vector>

namespace spectool
{

struct PlotFile
{
    std::string name; // file name, no directory
    std::string svg;
};

/// Sweep CSVs (alpha,g_over_G,T,speedup) give one heatmap per T; results
/// CSVs give one line chart per metric against tool_mean, a line per mode.
/// Throws ConfigError on an empty file or unknown header.
[[nodiscard]] std::vector<PlotFile> plot_csv(std::string_view csv);

} // namespace spectool
