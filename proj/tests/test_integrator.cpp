#include <doctest.h>

#include <cmath>
#include <random>

#include "rodsim/integrator.hpp"
#include "test_util.hpp"

using namespace rodsim;
using namespace rodsim::testutil;

namespace {

Material beam_material() { return Material::from_poisson(1e5, 0.5, 500.0, 0.02); }

RodSpec line_spec(const Vec3& a, const Vec3& b, int n, const Material& m) {
    RodSpec s;
    s.shape = RodSpec::Shape::line;
    s.a = a;
    s.b = b;
    s.node_count = n;
    s.material = m;
    return s;
}

}  // namespace

TEST_CASE("residual: rest in natural state is zero, ballistic step is exact") {
    Assembly assembly;
    assembly.add_rod(line_spec(Vec3(0, 0, 0), Vec3(1, 0, 0), 6, beam_material()));
    SimConfig cfg;
    cfg.dt = 0.01;
    Simulator sim(assembly, cfg);

    CHECK(sim.residual(sim.state().q).cwiseAbs().maxCoeff() < 1e-14);

    // free fall under gravity: the ballistic update solves the BE residual
    sim.config().gravity = Vec3(0, 0, -9.8);
    VecX q_next = sim.state().q;
    const int n_nodes = 6;
    for (int i = 0; i < n_nodes; ++i)
        q_next.segment<3>(assembly.node_base(0, i)) +=
            cfg.dt * Vec3::Zero() + cfg.dt * cfg.dt * Vec3(0, 0, -9.8);
    const VecX r = sim.residual(q_next);
    CHECK(r.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("residual matches independently assembled pieces") {
    Rod rod = random_rod(7, 42);
    Assembly assembly;
    assembly.add_rod(rod);
    SimConfig cfg;
    cfg.dt = 0.02;
    cfg.gravity = Vec3(0.3, -0.1, -9.8);
    cfg.damping = 0.7;
    Simulator sim(assembly, cfg);

    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    VecX q_next = sim.state().q;
    for (int i = 0; i < q_next.size(); ++i) q_next[i] += 0.001 * u(rng);
    VecX qdot = sim.state().qdot;
    for (int i = 0; i < qdot.size(); ++i) qdot[i] = 0.05 * u(rng);
    sim.state().qdot = qdot;

    const VecX r = sim.residual(q_next);

    // independent reassembly
    const VecX mass = assembly.lumped_mass();
    AssemblyState scratch = sim.state();
    assembly.sync_state(scratch, q_next);
    const GlobalTerms el = assembly.elastic_terms(scratch, {false, ExecMode::serial});
    const VecX v = (q_next - sim.state().q) / cfg.dt;
    VecX expected(assembly.dof_count());
    for (int i = 0; i < assembly.dof_count(); ++i)
        expected[i] = mass[i] / cfg.dt * ((q_next[i] - sim.state().q[i]) / cfg.dt - qdot[i]) +
                      el.gradient[i] + cfg.damping * mass[i] * v[i];
    for (int i = 0; i < 7; ++i) {
        double share = 0.0;
        const Rod& rr = assembly.rod(0);
        if (i > 0)
            share += 0.5 * rr.material.density * rr.material.area() *
                     rr.geometry.rest_edge_len[i - 1];
        if (i < 6)
            share += 0.5 * rr.material.density * rr.material.area() *
                     rr.geometry.rest_edge_len[i];
        expected.segment<3>(assembly.node_base(0, i)) -= share * cfg.gravity;
    }
    const double scale = std::max(1.0, expected.cwiseAbs().maxCoeff());
    CHECK((r - expected).cwiseAbs().maxCoeff() / scale < 1e-12);
}

TEST_CASE("system jacobian matches finite differences of the residual") {
    for (IntegratorKind kind : {IntegratorKind::backward_euler, IntegratorKind::implicit_midpoint}) {
        Rod rod = random_rod(6, 11);
        Assembly assembly;
        assembly.add_rod(rod);
        assembly.clamp_end(0, RodEnd::start);
        SimConfig cfg;
        cfg.dt = 0.05;
        cfg.integrator = kind;
        cfg.gravity = Vec3(0, 0, -9.8);
        cfg.damping = 0.2;
        Simulator sim(assembly, cfg);
        std::mt19937 rng(8);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        VecX qdot = sim.state().qdot;
        for (int i = 0; i < qdot.size(); ++i) qdot[i] = 0.02 * u(rng);
        const auto free = sim.free_indices();
        for (int i : free) qdot[i] += 0.01;
        sim.state().qdot = qdot;

        // evaluate at the committed state, where the transported-frame energy
        // Hessian is exact; Newton re-anchors frames the same way
        const VecX q_next = sim.state().q;

        const Eigen::SparseMatrix<double> jac = sim.system_jacobian(q_next);
        CHECK(jac.rows() == static_cast<int>(free.size()));  // fixed DOFs excluded

        const auto rfun = [&](const VecX& qf) {
            VecX q = q_next;
            for (size_t k = 0; k < free.size(); ++k) q[free[k]] = qf[k];
            const VecX r = sim.residual(q);
            VecX rf(free.size());
            for (size_t k = 0; k < free.size(); ++k) rf[k] = r[free[k]];
            return rf;
        };
        VecX qf(free.size());
        for (size_t k = 0; k < free.size(); ++k) qf[k] = q_next[free[k]];
        const MatX fd = fd_jacobian(rfun, qf, 1e-6);
        // The raw force Jacobian carries an antisymmetric artifact of the
        // transported-frame parametrization; the Newton matrix is the true
        // (symmetric) energy Hessian, so compare against the symmetrized FD.
        CHECK(max_rel_err(MatX(jac.toDense()), MatX(0.5 * (fd + fd.transpose()))) < 1e-4);
    }
}

TEST_CASE("newton: ballistic step converges in one iteration") {
    Assembly assembly;
    assembly.add_rod(line_spec(Vec3(0, 0, 0), Vec3(1, 0, 0), 5, beam_material()));
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.gravity = Vec3(0, 0, -9.8);
    Simulator sim(assembly, cfg);
    const StepStats stats = sim.step();
    CHECK(stats.converged);
    CHECK(stats.newton_iterations == 1);
    // velocity gained g dt
    CHECK(sim.state().qdot.segment<3>(assembly.node_base(0, 2)).z() ==
          doctest::Approx(-9.8 * cfg.dt).epsilon(1e-12));
}

TEST_CASE("step: zero forces leave the state bitwise unchanged") {
    Assembly assembly;
    assembly.add_rod(line_spec(Vec3(0, 0, 0), Vec3(1, 0, 0), 5, beam_material()));
    SimConfig cfg;
    cfg.dt = 0.01;
    Simulator sim(assembly, cfg);
    const VecX q0 = sim.state().q;
    const StepStats stats = sim.step();
    CHECK(stats.converged);
    CHECK((sim.state().q - q0).norm() == 0.0);
    CHECK(sim.state().qdot.norm() == 0.0);
}

TEST_CASE("fixed DOFs never change during a solve") {
    Assembly assembly;
    assembly.add_rod(line_spec(Vec3(0, 0, 0), Vec3(1, 0, 0), 9, beam_material()));
    assembly.clamp_end(0, RodEnd::start);
    SimConfig cfg;
    cfg.dt = 0.05;
    cfg.gravity = Vec3(0, 0, -9.8);
    Simulator sim(assembly, cfg);
    std::vector<double> fixed_before;
    for (int i = 0; i < assembly.dof_count(); ++i)
        if (assembly.fixed_mask()[i]) fixed_before.push_back(sim.state().q[i]);
    for (int s = 0; s < 10; ++s) CHECK(sim.step().converged);
    size_t k = 0;
    for (int i = 0; i < assembly.dof_count(); ++i)
        if (assembly.fixed_mask()[i]) {
            CHECK(sim.state().q[i] == fixed_before[k]);  // bitwise
            ++k;
        }
}

TEST_CASE("newton converges quadratically near the solution (contact-free)") {
    Assembly assembly;
    assembly.add_rod(line_spec(Vec3(0, 0, 0), Vec3(1, 0, 0), 15, beam_material()));
    assembly.clamp_end(0, RodEnd::start);
    SimConfig cfg;
    cfg.dt = 0.25;
    cfg.gravity = Vec3(0, 0, -9.8);
    cfg.newton_tol = 1e-10;
    Simulator sim(assembly, cfg);
    const StepStats stats = sim.step();
    CHECK(stats.converged);
    REQUIRE(stats.residual_history.size() >= 2);
    const size_t m = stats.residual_history.size();
    CHECK(stats.residual_history[m - 1] / stats.residual_history[m - 2] < 0.5);
    // line search keeps the history non-increasing
    for (size_t i = 1; i < m; ++i)
        CHECK(stats.residual_history[i] <= stats.residual_history[i - 1] * (1 + 1e-12));
}

TEST_CASE("backward Euler dissipates on the undamped cantilever") {
    Assembly assembly;
    assembly.add_rod(line_spec(Vec3(0, 0, 0), Vec3(1, 0, 0), 21, beam_material()));
    assembly.clamp_end(0, RodEnd::start);
    SimConfig cfg;
    cfg.dt = 0.1;
    cfg.integrator = IntegratorKind::backward_euler;
    Simulator sim(assembly, cfg);
    // pluck: initial transverse velocity ramp
    VecX qdot = sim.state().qdot;
    for (int i = 2; i < 21; ++i)
        qdot[assembly.node_base(0, i) + 2] = 0.005 * i / 20.0;
    sim.state().qdot = qdot;

    double prev = sim.mechanical_energy();
    const double e0 = prev;
    for (int s = 0; s < 40; ++s) {
        REQUIRE(sim.step().converged);
        const double e = sim.mechanical_energy();
        CHECK(e <= prev + 1e-12 * e0);
        prev = e;
    }
    CHECK(prev < e0);  // strictly dissipative over the run
}

TEST_CASE("implicit midpoint and explicit Verlet agree at the explicit-stable dt") {
    const auto run = [&](IntegratorKind kind) {
        Assembly assembly;
        assembly.add_rod(line_spec(Vec3(0, 0, 0), Vec3(1, 0, 0), 11, beam_material()));
        assembly.clamp_end(0, RodEnd::start);
        SimConfig cfg;
        cfg.dt = 1e-3;
        cfg.integrator = kind;
        Simulator sim(assembly, cfg);
        VecX qdot = sim.state().qdot;
        for (int i = 2; i < 11; ++i) {
            const double s = i / 10.0;
            qdot[assembly.node_base(0, i) + 2] = 0.005 * s * s;
        }
        sim.state().qdot = qdot;
        std::vector<double> tip;
        for (int s = 0; s < 2000; ++s) {
            sim.step();
            tip.push_back(sim.state().q[assembly.node_base(0, 10) + 2]);
        }
        return tip;
    };
    const auto tip_mp = run(IntegratorKind::implicit_midpoint);
    const auto tip_ve = run(IntegratorKind::verlet_explicit);
    double max_diff = 0.0, max_amp = 0.0;
    for (size_t i = 0; i < tip_mp.size(); ++i) {
        max_diff = std::max(max_diff, std::abs(tip_mp[i] - tip_ve[i]));
        max_amp = std::max(max_amp, std::abs(tip_ve[i]));
    }
    CHECK(max_amp > 0.0);
    CHECK(max_diff / max_amp < 0.01);
}

TEST_CASE("adaptive stepping halves on failure, recovers, and fails hard at min dt") {
    // a solver starved of iterations cannot take the configured step
    Assembly assembly;
    assembly.add_rod(line_spec(Vec3(0, 0, 0), Vec3(1, 0, 0), 13, beam_material()));
    assembly.clamp_end(0, RodEnd::start);
    SimConfig cfg;
    cfg.dt = 0.5;
    cfg.gravity = Vec3(0, 0, -9.8);
    cfg.max_newton_iters = 2;
    cfg.newton_tol = 1e-9;
    cfg.adaptive.enabled = true;
    cfg.adaptive.min_dt = 1e-5;
    Simulator sim(assembly, cfg);

    bool reduced = false;
    double min_dt_seen = cfg.dt;
    for (int s = 0; s < 60; ++s) {
        const StepStats stats = sim.adaptive_step();
        CHECK(stats.converged);
        reduced = reduced || stats.dt_reductions > 0;
        min_dt_seen = std::min(min_dt_seen, stats.dt_used);
    }
    CHECK(reduced);
    CHECK(min_dt_seen < cfg.dt);
    // growth happens after streaks of successes
    CHECK(sim.current_dt() > min_dt_seen);

    // impossible tolerance: adaptive bottoms out and raises a hard error
    Assembly assembly2;
    assembly2.add_rod(line_spec(Vec3(0, 0, 0), Vec3(1, 0, 0), 7, beam_material()));
    SimConfig cfg2;
    cfg2.dt = 0.1;
    cfg2.gravity = Vec3(0, 0, -9.8);
    cfg2.max_newton_iters = 0;  // nothing can converge
    cfg2.adaptive.enabled = true;
    cfg2.adaptive.min_dt = 0.01;
    Simulator sim2(assembly2, cfg2);
    CHECK_THROWS_AS(sim2.adaptive_step(), SolveError);
}

TEST_CASE("rod settles onto the floor and rests without deep penetration") {
    Material m = Material::from_poisson(1e5, 0.5, 509.3, 0.025);
    Assembly assembly;
    assembly.add_rod(line_spec(Vec3(0, 0, 0.0251), Vec3(1, 0, 0.0251), 11, m));
    SimConfig cfg;
    cfg.dt = 5e-3;
    cfg.gravity = Vec3(0, 0, -9.8);
    cfg.damping = 5.0;
    Simulator sim(assembly, cfg);
    ContactParams cp;
    cp.delta = 5e-4;
    cp.nu = 1e-3;
    cp.mu = 0.0;
    cp.stiffness = 2e4;
    sim.set_floor(FloorPlane{Vec3(0, 0, 1), 0.0}, cp);

    for (int s = 0; s < 400; ++s) REQUIRE(sim.step().converged);
    CHECK(sim.max_node_speed() < 1e-4);
    CHECK(sim.max_penetration() < cp.delta);
    CHECK(sim.active_contact_count() > 0);
    // weight is fully supported: z-residual of the settled state is tiny
    const VecX r = sim.residual(sim.state().q);
    CHECK(r.cwiseAbs().maxCoeff() < 1e-5 * sim.residual_scale());
}
