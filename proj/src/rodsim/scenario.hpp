#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "actuation.hpp"
#include "integrator.hpp"

namespace rodsim {

// Declarative simulation description, parsed from the line-oriented scenario
// text format and serializable back to a canonical form.
struct ScenarioSpec {
    struct MaterialDef {
        std::string name;
        double youngs = 0.0, rho = 0.0, radius = 0.0;
        std::optional<double> poisson;  // either poisson or shear set
        std::optional<double> shear;
    };
    struct RodDef {
        std::string name;
        std::string material;
        enum class Kind { line, helix } kind = Kind::line;
        Vec3 a = Vec3::Zero(), b = Vec3::Zero();       // line
        Vec3 center = Vec3::Zero(), axis = Vec3(0, 0, 1);  // helix
        double radius = 0.0, pitch = 0.0, contour = 0.0, phase = 0.0;
        int nodes = 0;
    };
    struct JointDef {
        std::string rod_a;
        int node_a = 0;
        std::string rod_b;
        RodEnd end_b = RodEnd::start;
    };
    struct BcDef {
        enum class Kind { clamp, fix_node, fix_theta } kind = Kind::clamp;
        std::string rod;
        RodEnd end = RodEnd::start;  // clamp
        int index = 0;               // fix_node / fix_theta
    };
    struct ContactDef {
        double mu = 0.0, delta = 5e-4, nu = 1e-3, stiffness = 1e4;
    };
    struct FloorDef : ContactDef {
        double z = 0.0;
    };
    struct PushDef {
        std::string rod;
        Vec3 force = Vec3::Zero();
    };
    struct ActuateDef {
        std::string rod;
        enum class Kind { phi_deg, kappa, random_phi_deg } kind = Kind::phi_deg;
        double phi_deg = 0.0;
        Vec2 kappa = Vec2::Zero();
        double lo_deg = 0.0, hi_deg = 0.0;  // random
        unsigned seed = 0;
        double azimuth_deg = 0.0;  // bending direction in the material frame
        double ramp_t0 = 0.0, ramp_t1 = 0.0;
    };
    struct SimDef {
        double dt = 1e-3;
        double time = 1.0;
        std::string integrator = "backward_euler";
        double tol = 1e-8;
        int max_iters = 50;
        bool line_search = true;
        bool adaptive = false;
        double min_dt = 1e-7;
        double settle_time = 0.0;     // damped pre-roll; clock resets after
        double settle_damping = 0.0;
    };
    struct InitVelocityDef {
        std::string rod;
        double tip_velocity = 0.0;  // first-mode transverse profile, z axis
    };
    struct LogDef {
        int every = 1;
        bool energies = false;
    };
    struct SweepDef {
        std::string parameter;  // push_x | push_y | push_z
        std::string rod;
        std::vector<double> values;
    };
    struct Real2SimDef {
        std::string marker_path;
        std::vector<std::string> limbs;
        double alpha = 0.1;
        double eps = 1e-3;
        double tol = 1e-3;
        double settle_vel = 1e-4;
        int max_iters = 50;
        bool cold_start = false;
    };

    std::vector<MaterialDef> materials;
    std::vector<RodDef> rods;
    std::vector<JointDef> joints;
    std::vector<BcDef> bcs;
    Vec3 gravity = Vec3::Zero();
    double damping = 0.0;
    std::optional<FloorDef> floor;
    std::optional<ContactDef> selfcontact;
    std::vector<PushDef> pushes;
    std::vector<ActuateDef> actuations;
    SimDef sim;
    std::optional<InitVelocityDef> init_velocity;
    LogDef log;
    std::optional<SweepDef> sweep;
    std::optional<Real2SimDef> real2sim;
    unsigned seed = 0;

    int rod_index(const std::string& name) const;
    const MaterialDef& material(const std::string& name) const;
};

ScenarioSpec parse_scenario(const std::string& text);
ScenarioSpec load_scenario(const std::string& path);
std::string serialize_scenario(const ScenarioSpec& spec);

// Instantiated scenario, ready to run.
struct BuiltScenario {
    std::unique_ptr<Assembly> assembly;
    std::unique_ptr<Simulator> sim;
    ActuationSchedule schedule;
    ScenarioSpec spec;
};

BuiltScenario build_scenario(const ScenarioSpec& spec);

}  // namespace rodsim
