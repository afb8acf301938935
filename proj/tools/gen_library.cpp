// SPDX-License-Identifier: Apache-2.0
// Writes the shipped task libraries and fixtures.

#include <spectool/error.hpp>
#include <spectool/tasks.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app { "Generate task and fixture files", "gen_library" };
    std::string outDir = "data";
    std::size_t count = 64;
    std::uint64_t seed = 2025;
    app.add_option("--out-dir", outDir, "output directory");
    app.add_option("--count", count, "synthetic task count")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "synthetic library seed");
    CLI11_PARSE(app, argc, argv);

    try
    {
        std::filesystem::path const dir(outDir);
        std::filesystem::create_directories(dir);
        auto const synthetic = spectool::synthetic_library(count, seed);
        spectool::save_tasks(dir / "tasks.json", synthetic);
        spectool::save_fixtures(dir / "fixtures.json", synthetic.fixtures);
        auto const twoTurn = spectool::two_turn_library();
        spectool::save_tasks(dir / "two_turn_tasks.json", twoTurn);
        spectool::save_fixtures(dir / "two_turn_fixtures.json", twoTurn.fixtures);
    }
    catch (const std::exception& e)
    {
        std::cerr << "gen_library: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
