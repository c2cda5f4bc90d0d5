#include "runner.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <thread>

namespace rodsim {

namespace {

void log_row(CsvTable& table, const BuiltScenario& built) {
    const Assembly& assembly = *built.assembly;
    const Simulator& sim = *built.sim;
    std::vector<double> row;
    row.reserve(table.columns.size());
    row.push_back(sim.time());
    for (int r = 0; r < assembly.rod_count(); ++r)
        for (int i = 0; i < assembly.rod(r).geometry.node_count; ++i) {
            const Vec3 p = sim.state().q.segment<3>(assembly.node_base(r, i));
            row.push_back(p.x());
            row.push_back(p.y());
            row.push_back(p.z());
        }
    if (built.spec.log.energies) {
        row.push_back(sim.kinetic_energy());
        row.push_back(sim.elastic_energy());
        row.push_back(sim.gravity_energy());
        row.push_back(sim.contact_energy());
    }
    table.rows.push_back(std::move(row));
}

CsvTable make_log_table(const BuiltScenario& built) {
    CsvTable t;
    t.columns.push_back("t");
    const Assembly& assembly = *built.assembly;
    for (int r = 0; r < assembly.rod_count(); ++r) {
        const std::string& name = built.spec.rods[r].name;
        for (int i = 0; i < assembly.rod(r).geometry.node_count; ++i)
            for (const char* c : {".x", ".y", ".z"})
                t.columns.push_back(name + ".n" + std::to_string(i) + c);
    }
    if (built.spec.log.energies)
        for (const char* c : {"e_kinetic", "e_elastic", "e_gravity", "e_contact"})
            t.columns.push_back(c);
    return t;
}

}  // namespace

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("RODSIM_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    return 1;
}

ScenarioSpec apply_overrides(ScenarioSpec spec, const RunOptions& opts) {
    if (opts.dt) spec.sim.dt = *opts.dt;
    if (opts.sim_time) spec.sim.time = *opts.sim_time;
    if (opts.integrator) spec.sim.integrator = *opts.integrator;
    if (opts.seed) spec.seed = *opts.seed;
    if (opts.log_every) spec.log.every = *opts.log_every;
    return spec;
}

RunResult run_scenario(const ScenarioSpec& raw_spec, const RunOptions& opts) {
    const auto t_start = std::chrono::steady_clock::now();
    const ScenarioSpec spec = apply_overrides(raw_spec, opts);
    BuiltScenario built = build_scenario(spec);
    Simulator& sim = *built.sim;

    RunResult out;
    out.min_dt_used = spec.sim.dt;

    // damped pre-roll to rest; pushes and actuation switch on at t=0 after it
    if (spec.sim.settle_time > 0.0) {
        SimConfig& cfg = sim.config();
        const SimConfig saved = cfg;
        cfg.integrator = IntegratorKind::backward_euler;
        cfg.damping = spec.sim.settle_damping;
        auto hold = std::move(sim.pre_step);
        sim.pre_step = nullptr;
        const auto held_pushes = sim.pushes();
        sim.clear_pushes();
        while (sim.time() < spec.sim.settle_time) {
            const StepStats stats = cfg.adaptive.enabled ? sim.adaptive_step() : sim.step();
            if (!stats.converged) throw SolveError("settle phase failed to converge");
        }
        sim.config() = saved;
        sim.pre_step = std::move(hold);
        for (const auto& [rod, f] : held_pushes) sim.add_push(rod, f);
        sim.state().qdot.setZero();
        sim.state().time = 0.0;
    }

    CsvTable table = make_log_table(built);
    log_row(table, built);

    const double t_end = spec.sim.time;
    long step_index = 0;
    while (sim.time() < t_end - 1e-12) {
        const StepStats stats =
            sim.config().adaptive.enabled ? sim.adaptive_step() : sim.step();
        if (!stats.converged)
            throw SolveError("step did not converge at t=" + std::to_string(sim.time()) +
                             " (enable adaptive stepping or reduce dt)");
        ++step_index;
        out.total_newton_iterations += stats.newton_iterations;
        out.max_contact_pairs = std::max(out.max_contact_pairs, stats.contact_pairs);
        out.total_dt_reductions += stats.dt_reductions;
        out.min_dt_used = std::min(out.min_dt_used, stats.dt_used);
        if (step_index % spec.log.every == 0) {
            log_row(table, built);
            out.max_penetration_logged =
                std::max(out.max_penetration_logged, sim.max_penetration());
        }
    }
    if (step_index % spec.log.every != 0) log_row(table, built);

    out.steps = step_index;
    out.final_kinetic_energy = sim.kinetic_energy();
    out.final_max_node_speed = sim.max_node_speed();
    out.max_penetration_logged = std::max(out.max_penetration_logged, sim.max_penetration());
    out.log = std::move(table);
    if (opts.write_log) {
        std::filesystem::create_directories(opts.out_dir);
        out.log_path = (std::filesystem::path(opts.out_dir) / opts.log_name).string();
        write_csv(out.log, out.log_path);
    }
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
}

SweepResult sweep_runner(const ScenarioSpec& raw_spec, const RunOptions& opts) {
    const ScenarioSpec spec = apply_overrides(raw_spec, opts);
    if (!spec.sweep) throw std::invalid_argument("scenario has no sweep section");
    const auto& sw = *spec.sweep;

    SweepResult result;
    result.entries.resize(sw.values.size());

    const int workers = resolve_workers(opts.workers);
    std::atomic<size_t> next{0};
    const auto task = [&](size_t idx) {
        SweepResult::Entry& entry = result.entries[idx];
        entry.value = sw.values[idx];
        try {
            ScenarioSpec run_spec = spec;
            run_spec.sweep.reset();
            Vec3 f = Vec3::Zero();
            if (sw.parameter == "push_x") f.x() = sw.values[idx];
            if (sw.parameter == "push_y") f.y() = sw.values[idx];
            if (sw.parameter == "push_z") f.z() = sw.values[idx];
            run_spec.pushes.push_back({sw.rod, f});
            RunOptions run_opts = opts;
            run_opts.log_name = "sweep_" + std::to_string(idx) + ".csv";
            const RunResult r = run_scenario(run_spec, run_opts);
            entry.kinetic_energy = r.final_kinetic_energy;
            entry.log_path = r.log_path;
            entry.ok = true;
        } catch (const std::exception& e) {
            entry.ok = false;
            entry.error = e.what();  // record and continue with the other values
        }
    };

    if (workers <= 1) {
        for (size_t i = 0; i < sw.values.size(); ++i) task(i);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                while (true) {
                    const size_t idx = next.fetch_add(1);
                    if (idx >= sw.values.size()) return;
                    task(idx);
                }
            });
        for (auto& th : pool) th.join();
    }

    result.summary.columns = {"value", "kinetic_energy", "ok"};
    for (const auto& e : result.entries)
        result.summary.rows.push_back({e.value, e.kinetic_energy, e.ok ? 1.0 : 0.0});
    if (opts.write_log) {
        std::filesystem::create_directories(opts.out_dir);
        result.summary_path =
            (std::filesystem::path(opts.out_dir) / "sweep_summary.csv").string();
        write_csv(result.summary, result.summary_path);
    }
    return result;
}

Real2SimRunResult run_real2sim(const ScenarioSpec& raw_spec, const RunOptions& opts) {
    const ScenarioSpec spec = apply_overrides(raw_spec, opts);
    if (!spec.real2sim) throw std::invalid_argument("scenario has no real2sim section");
    const auto& r2s = *spec.real2sim;

    const auto targets_phys = targets_from_marker_file(r2s.marker_path);

    Real2SimProblem problem;
    for (const auto& limb : r2s.limbs) problem.limbs.push_back(spec.rod_index(limb));
    problem.make_sim = [&spec] {
        BuiltScenario built = build_scenario(spec);
        SimInstance inst;
        inst.assembly = std::move(built.assembly);
        inst.sim = std::move(built.sim);
        return inst;
    };

    Real2SimParams params;
    params.alpha0 = r2s.alpha;
    params.epsilon = r2s.eps;
    params.tolerance = r2s.tol;
    params.settle_velocity = r2s.settle_vel;
    params.max_iters = r2s.max_iters;
    params.warm_start = !r2s.cold_start;
    params.settle_max_time = spec.sim.time;

    // integrated units: physical curvature times the limb's mean Voronoi length
    BuiltScenario probe = build_scenario(spec);
    std::vector<VecX> targets;
    for (const auto& t : targets_phys) {
        if (t.kappa_phys.size() != problem.limbs.size())
            throw std::invalid_argument("marker limb count does not match the scenario");
        VecX v(problem.limbs.size());
        for (size_t k = 0; k < problem.limbs.size(); ++k) {
            const double vbar =
                probe.assembly->rod(problem.limbs[k]).geometry.voronoi_len.mean();
            v[k] = t.kappa_phys[k] * vbar;
        }
        targets.push_back(v);
    }

    Real2SimRunResult out;
    out.solver = solve_natural_curvatures(targets, problem, params);

    out.trajectory.columns = {"frame"};
    for (size_t k = 0; k < problem.limbs.size(); ++k)
        out.trajectory.columns.push_back("kappa_bar" + std::to_string(k));
    out.trajectory.columns.push_back("loss");
    out.trajectory.columns.push_back("iterations");
    out.trajectory.columns.push_back("converged");
    for (size_t f = 0; f < out.solver.frames.size(); ++f) {
        const auto& fr = out.solver.frames[f];
        std::vector<double> row{static_cast<double>(f)};
        for (int k = 0; k < fr.kappa_bar.size(); ++k) row.push_back(fr.kappa_bar[k]);
        row.push_back(fr.loss);
        row.push_back(static_cast<double>(fr.iterations));
        row.push_back(fr.converged ? 1.0 : 0.0);
        out.trajectory.rows.push_back(std::move(row));
    }
    if (opts.write_log) {
        std::filesystem::create_directories(opts.out_dir);
        out.trajectory_path =
            (std::filesystem::path(opts.out_dir) / "real2sim_trajectory.csv").string();
        write_csv(out.trajectory, out.trajectory_path);
    }
    return out;
}

}  // namespace rodsim
