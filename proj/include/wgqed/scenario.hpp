// scenario.hpp — Scenario runner: reads a config+task description, dispatches to
// the computation modules, writes deterministic CSV/JSON artifacts.

#pragma once

#include <string>
#include <vector>

#include "wgqed/config.hpp"
#include "wgqed/types.hpp"

namespace wgqed {

enum class Task {
    Spectrum,
    G2,
    TransientSpontaneous,
    TransientAbsorption,
    StimulatedOptimum,
    ArrayRetardation,
    MirrorEntanglement,
    PolaritonSingle,
    PolaritonPair,
    GmeEvolve,
};

const char* task_name(Task t);
Task task_from_name(const std::string& name);

struct Grid {
    std::vector<double> points;
};

struct Scenario {
    std::string name;
    SystemConfig system;
    Task task{Task::Spectrum};
    Grid k_grid, x_grid, t_grid;
    std::string output_path{"out.csv"};
    std::string format{"csv"};
    std::string options_json{"{}"};  // task-specific options, schema per task
    std::string raw_json;            // canonical source text for hashing
};

Scenario scenario_from_json(const std::string& text);
Scenario scenario_from_file(const std::string& path);

struct SummaryExtra {
    std::string name;
    double value;
};

struct RunSummary {
    std::string name;
    std::string headline_name;
    double headline{0.0};
    std::vector<SummaryExtra> extras;
    std::string config_hash;
    std::vector<std::string> outputs;
    double wall_seconds{0.0};
};

// Executes one scenario; output files are written atomically under output_dir.
RunSummary run(const Scenario& scenario, const std::string& output_dir, unsigned threads = 1);

// Fan-out over values of a scalar field addressed by a dot path into the
// scenario JSON (e.g. "system.array.spacing"); writes one artifact per value
// plus an index file listing (value, headline, extras) sorted by value.
std::vector<RunSummary> sweep(const Scenario& scenario, const std::string& param_path,
                              const std::vector<double>& values, const std::string& output_dir,
                              unsigned threads = 1);

std::string fnv1a_hex(const std::string& text);

}  // namespace wgqed
