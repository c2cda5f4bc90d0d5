#pragma once

#include <vector>

#include "assembly.hpp"

namespace rodsim {

// kappa = 2 tan(phi/2); |phi| < pi
double curvature_from_angle(double phi_rad);

// Uniform natural-curvature actuation of one rod, in integrated units scaled
// per node by Voronoi length so the limb adopts constant physical curvature.
void set_natural_curvature(Assembly& assembly, int rod, const Vec2& kappa_integrated);
void set_natural_angle(Assembly& assembly, int rod, const Vec2& phi_rad);

// Mean physical curvature of the limb's kappa1 component, reported in
// integrated units (scaled back by the limb's mean Voronoi length).
double measure_limb_curvature(const Assembly& assembly, const AssemblyState& state, int rod);

// Time-scheduled natural-curvature targets: a per-node base pattern per limb,
// scaled by a keyframed factor (step or linear interpolation).
struct ActuationSchedule {
    struct Channel {
        int rod = 0;
        std::vector<Vec2> base_curvature;             // per interior node
        std::vector<std::pair<double, double>> keys;  // (time, scale)
        bool linear = true;
    };
    std::vector<Channel> channels;

    static double scale_at(const Channel& ch, double t);
    void apply(Assembly& assembly, double t) const;

    // Channel helpers. Angles are converted by kappa = 2 tan(phi/2).
    static Channel uniform(const Assembly& assembly, int rod, const Vec2& kappa_integrated);
    static Channel uniform_angle(const Assembly& assembly, int rod, const Vec2& phi_rad);
};

}  // namespace rodsim
