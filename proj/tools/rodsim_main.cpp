#include <CLI11.hpp>
#include <iostream>

#include "rodsim/oracles.hpp"
#include "rodsim/report.hpp"
#include "rodsim/runner.hpp"

using namespace rodsim;

namespace {

struct CommonArgs {
    std::string scenario;
    RunOptions opts;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--scenario", args.scenario, "scenario file")->required();
    auto opt = [&](const char* name, auto& slot, const char* help) {
        cmd->add_option(name, slot, help);
    };
    static thread_local double dt_v;
    (void)opt;
    cmd->add_option_function<double>(
        "--dt", [&args](double v) { args.opts.dt = v; }, "time step override");
    cmd->add_option_function<double>(
        "--sim-time", [&args](double v) { args.opts.sim_time = v; }, "sim time override");
    cmd->add_option_function<std::string>(
        "--integrator", [&args](const std::string& v) { args.opts.integrator = v; },
        "integrator override (backward_euler|implicit_midpoint|verlet)");
    cmd->add_option_function<unsigned>(
        "--seed", [&args](unsigned v) { args.opts.seed = v; }, "seed override");
    cmd->add_option_function<int>(
        "--log-every", [&args](int v) { args.opts.log_every = v; }, "log cadence override");
    cmd->add_option("--out", args.opts.out_dir, "output directory");
    cmd->add_option("--workers", args.opts.workers,
                    "worker count (default: RODSIM_WORKERS or 1)");
}

int fail(const std::string& message) {
    std::cout << "{\"error\":\"" << message << "\"}" << std::endl;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scenario-driven elastic rod simulation"};
    app.require_subcommand(1);

    CommonArgs run_args, sweep_args, r2s_args;
    CLI::App* run_cmd = app.add_subcommand("run", "run one scenario and log the trajectory");
    add_common(run_cmd, run_args);
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run the scenario's parameter sweep");
    add_common(sweep_cmd, sweep_args);
    CLI::App* r2s_cmd =
        app.add_subcommand("real2sim", "fit natural curvatures to recorded marker data");
    add_common(r2s_cmd, r2s_args);

    std::string report_log, report_ref, report_scenario, report_column;
    CLI::App* report_cmd = app.add_subcommand("report", "compare a trajectory log");
    report_cmd->add_option("--log", report_log, "trajectory csv")->required();
    report_cmd->add_option("--ref", report_ref, "reference csv to compare against");
    report_cmd->add_option("--scenario", report_scenario,
                           "scenario file (enables the beam oracle comparison)");
    report_cmd->add_option("--column", report_column, "column to analyze (default: last node z)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            const RunResult r = run_scenario(load_scenario(run_args.scenario), run_args.opts);
            std::cout << "steps " << r.steps << "\n"
                      << "newton_iterations " << r.total_newton_iterations << "\n"
                      << "max_contact_pairs " << r.max_contact_pairs << "\n"
                      << "final_kinetic_energy " << format_double(r.final_kinetic_energy) << "\n"
                      << "wall_seconds " << r.wall_seconds << "\n"
                      << "log " << r.log_path << "\n";
            return 0;
        }
        if (sweep_cmd->parsed()) {
            const SweepResult r = sweep_runner(load_scenario(sweep_args.scenario), sweep_args.opts);
            int failures = 0;
            for (const auto& e : r.entries)
                if (!e.ok) ++failures;
            std::cout << "sweep_values " << r.entries.size() << "\n"
                      << "failures " << failures << "\n"
                      << "summary " << r.summary_path << "\n";
            for (const auto& e : r.entries)
                if (!e.ok) std::cout << "failed value " << e.value << ": " << e.error << "\n";
            return failures == 0 ? 0 : 1;
        }
        if (r2s_cmd->parsed()) {
            const Real2SimRunResult r =
                run_real2sim(load_scenario(r2s_args.scenario), r2s_args.opts);
            std::cout << "frames " << r.solver.frames.size() << "\n"
                      << "all_converged " << (r.solver.all_converged() ? 1 : 0) << "\n"
                      << "trajectory " << r.trajectory_path << "\n";
            return r.solver.all_converged() ? 0 : 1;
        }
        if (report_cmd->parsed()) {
            const CsvTable log = read_csv(report_log);
            const std::vector<double> times = log.column("t");
            std::string column = report_column;
            if (column.empty()) {
                // default: the z column of the last logged node
                for (const auto& c : log.columns)
                    if (c.size() > 2 && c.substr(c.size() - 2) == ".z") column = c;
            }
            const std::vector<double> series = log.column(column);

            std::vector<double> want(series.size(), 0.0);
            std::string title = column + " vs zero";
            if (!report_ref.empty()) {
                const CsvTable ref = read_csv(report_ref);
                if (ref.column("t") != times)
                    throw std::invalid_argument("log and reference time grids differ");
                want = ref.column(column);
                title = column + " vs reference";
            } else if (!report_scenario.empty()) {
                const ScenarioSpec spec = load_scenario(report_scenario);
                if (!spec.init_velocity)
                    throw std::invalid_argument(
                        "scenario has no beam oracle (init_mode_velocity missing)");
                const auto& md = spec.material(
                    spec.rods[spec.rod_index(spec.init_velocity->rod)].material);
                const Material mat =
                    md.poisson ? Material::from_poisson(md.youngs, *md.poisson, md.rho, md.radius)
                               : Material(md.youngs, *md.shear, md.rho, md.radius);
                const auto& rd = spec.rods[spec.rod_index(spec.init_velocity->rod)];
                const double length = (rd.b - rd.a).norm();
                const CantileverOracle oracle(mat, length, spec.init_velocity->tip_velocity);
                for (size_t i = 0; i < times.size(); ++i)
                    want[i] = oracle.tip_deflection(times[i]);
                title = column + " vs beam oracle";
            }
            const SeriesMetrics m = compare_series(times, series, want);
            std::cout << format_report(title, m);
            return 0;
        }
    } catch (const std::exception& e) {
        return fail(e.what());
    }
    return fail("no subcommand");
}
