#pragma once

#include <Eigen/SparseCore>
#include <functional>
#include <optional>

#include "assembly.hpp"
#include "contact.hpp"

namespace rodsim {

enum class IntegratorKind { backward_euler, implicit_midpoint, verlet_explicit };

struct AdaptiveConfig {
    bool enabled = false;
    double min_dt = 1e-7;
    double grow = 1.5;
    double shrink = 0.5;
    int successes_to_grow = 5;
};

struct SimConfig {
    double dt = 1e-3;
    IntegratorKind integrator = IntegratorKind::backward_euler;
    double newton_tol = 1e-8;  // residual tolerance, scaled by a characteristic force
    int max_newton_iters = 50;
    bool line_search = true;
    AdaptiveConfig adaptive;
    Vec3 gravity = Vec3::Zero();
    double damping = 0.0;  // mass-proportional viscous coefficient [1/s]

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
        if (!(newton_tol > 0.0)) throw std::invalid_argument("newton_tol must be positive");
        if (adaptive.enabled && !(adaptive.min_dt > 0.0 && adaptive.min_dt <= dt))
            throw std::invalid_argument("adaptive min_dt must satisfy 0 < min_dt <= dt");
    }
};

struct StepStats {
    int newton_iterations = 0;
    std::vector<double> residual_history;
    double dt_used = 0.0;
    int line_search_backtracks = 0;
    int contact_pairs = 0;
    bool converged = true;
    int dt_reductions = 0;
};

// Drives one assembly through time. Holds the committed state; every residual
// evaluation is a pure function of the candidate DOFs given that state.
class Simulator {
public:
    Simulator(Assembly& assembly, const SimConfig& config);

    void set_floor(const FloorPlane& plane, const ContactParams& params);
    void set_self_contact(const ContactParams& params);
    // Constant force distributed over the rod's nodes by mass share.
    void add_push(int rod, const Vec3& total_force);
    void set_push(int rod, const Vec3& total_force);
    std::vector<std::pair<int, Vec3>> pushes() const { return pushes_; }
    void clear_pushes() { pushes_.clear(); }

    SimConfig& config() { return config_; }
    const SimConfig& config() const { return config_; }
    AssemblyState& state() { return state_; }
    const AssemblyState& state() const { return state_; }
    Assembly& assembly() { return *assembly_; }
    const Assembly& assembly() const { return *assembly_; }
    double time() const { return state_.time; }

    // Called with the end time of each step before solving (actuation hook).
    std::function<void(double)> pre_step;
    // Optional schedule for fixed DOFs: fills prescribed values at time t.
    std::function<void(double, VecX&)> prescribed_motion;

    // One step at config.dt. On Newton failure returns converged=false and
    // leaves the state untouched.
    StepStats step();
    // Halve dt on failure (down to min_dt), grow back after repeated success.
    StepStats adaptive_step();
    double current_dt() const { return current_dt_; }

    // Implicit-step residual at candidate q_next, full DOF length.
    VecX residual(const VecX& q_next);
    // Newton matrix restricted to free DOFs.
    Eigen::SparseMatrix<double> system_jacobian(const VecX& q_next);
    std::vector<int> free_indices() const;
    double residual_scale() const;

    double kinetic_energy() const;
    double elastic_energy() const;
    double gravity_energy() const;
    double contact_energy() const;
    double mechanical_energy() const;
    int active_contact_count() const;
    // Largest (C - D) over current contact pairs, 0 when clear.
    double max_penetration() const;
    double max_node_speed() const;

    const VecX& mass() const { return mass_; }

private:
    struct ForceResult {
        VecX force;
        std::vector<Eigen::Triplet<double>> jac;  // -dF/dq_next contributions
        int contact_pairs = 0;
        double contact_energy = 0.0;
    };
    struct EvalResult {
        VecX r;
        std::vector<Eigen::Triplet<double>> jac;
        int contact_pairs = 0;
        double contact_energy = 0.0;
    };

    ForceResult compute_force(const VecX& q_eval, const VecX& v_eval, double chain, double dt,
                              bool with_jacobian);
    EvalResult eval(const VecX& q_next, bool with_jacobian);
    void refresh_candidates(const VecX& q);
    void maybe_refresh_candidates(const VecX& q);
    StepStats newton_step(double dt);
    StepStats verlet_step(double dt);
    VecX prescribed_at(double t) const;
    void rebuild_collision_edges();
    ContactSet narrow_phase(const VecX& q) const;

    Assembly* assembly_;
    SimConfig config_;
    AssemblyState state_;
    VecX mass_;
    double current_dt_;
    int success_streak_ = 0;

    std::optional<FloorPlane> floor_;
    ContactParams floor_params_;
    bool self_contact_ = false;
    ContactParams self_params_;
    std::vector<std::pair<int, Vec3>> pushes_;

    std::vector<CollisionEdge> collision_edges_;
    std::vector<int> exclusion_window_;
    ContactSet candidates_;
    VecX q_at_broad_phase_;
    bool contact_enabled_ = false;

    // scratch for evaluations
    AssemblyState scratch_;
    double eval_dt_ = 0.0;
};

}  // namespace rodsim
