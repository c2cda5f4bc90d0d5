#pragma once

#include <optional>

#include "csv.hpp"
#include "real2sim.hpp"
#include "scenario.hpp"

namespace rodsim {

struct RunOptions {
    std::optional<double> dt;
    std::optional<double> sim_time;
    std::optional<std::string> integrator;
    std::optional<unsigned> seed;
    std::optional<int> log_every;
    std::string out_dir = ".";
    std::string log_name = "trajectory.csv";
    int workers = 0;  // 0: RODSIM_WORKERS env or 1
    bool write_log = true;
};

int resolve_workers(int requested);

ScenarioSpec apply_overrides(ScenarioSpec spec, const RunOptions& opts);

struct RunResult {
    CsvTable log;
    std::string log_path;
    double wall_seconds = 0.0;
    long total_newton_iterations = 0;
    long steps = 0;
    int max_contact_pairs = 0;
    int total_dt_reductions = 0;
    double min_dt_used = 0.0;
    double final_kinetic_energy = 0.0;
    double final_max_node_speed = 0.0;
    double max_penetration_logged = 0.0;
};

// Build, optionally settle, run to T, and write the trajectory log.
RunResult run_scenario(const ScenarioSpec& spec, const RunOptions& opts);

struct SweepResult {
    struct Entry {
        double value = 0.0;
        bool ok = false;
        std::string error;
        double kinetic_energy = 0.0;
        std::string log_path;
    };
    std::vector<Entry> entries;
    CsvTable summary;
    std::string summary_path;
};

// Independent runs over the sweep values, executed on a worker pool; outputs
// are identical to a serial execution.
SweepResult sweep_runner(const ScenarioSpec& spec, const RunOptions& opts);

struct Real2SimRunResult {
    Real2SimResult solver;
    CsvTable trajectory;
    std::string trajectory_path;
};

Real2SimRunResult run_real2sim(const ScenarioSpec& spec, const RunOptions& opts);

}  // namespace rodsim
