#pragma once

#include <functional>
#include <iosfwd>
#include <memory>

#include "integrator.hpp"

namespace rodsim {

struct Real2SimParams {
    double alpha0 = 0.1;          // initial descent step size
    double epsilon = 1e-3;        // forward-difference probe, integrated units
    double tolerance = 1e-3;      // loss tolerance, integrated units
    double settle_velocity = 1e-4;  // quasistatic settle criterion [m/s]
    int max_iters = 50;
    double settle_max_time = 30.0;  // settle failure beyond this horizon
    bool warm_start = true;         // false reproduces the cold start per frame
};

// Per-limb constant-curvature targets of one recorded frame [1/m].
struct CurvatureTarget {
    std::vector<double> kappa_phys;
};

// Plain-text marker table: rows "frame limb marker_index x y [z]", comments
// start with '#'. Curvature of each limb's marker polyline, averaged.
std::vector<CurvatureTarget> targets_from_markers(std::istream& in);
std::vector<CurvatureTarget> targets_from_marker_file(const std::string& path);

// A fresh, independent simulation instance in the build pose. The simulator's
// config must already define gravity/damping suitable for quasistatic
// settling (backward Euler recommended).
struct SimInstance {
    std::unique_ptr<Assembly> assembly;
    std::unique_ptr<Simulator> sim;
};

struct Real2SimProblem {
    std::function<SimInstance()> make_sim;
    std::vector<int> limbs;
};

struct Real2SimFrame {
    VecX kappa_bar;  // solved natural curvature per limb, integrated units
    double loss = 0.0;
    int iterations = 0;
    bool converged = true;
};

struct Real2SimResult {
    std::vector<Real2SimFrame> frames;
    bool all_converged() const {
        for (const auto& f : frames)
            if (!f.converged) return false;
        return true;
    }
};

// Settle the simulation quasistatically under the given per-limb natural
// curvatures and report the measured limb curvatures (integrated units).
VecX settle_and_measure(const Real2SimProblem& problem, const VecX& kappa_bar,
                        const Real2SimParams& params,
                        AssemblyState* settled_state = nullptr);

// Gradient-descent fit of natural curvatures to per-frame targets. Targets
// are given in integrated units (physical curvature times the limb's mean
// Voronoi length).
Real2SimResult solve_natural_curvatures(const std::vector<VecX>& targets_integrated,
                                        const Real2SimProblem& problem,
                                        const Real2SimParams& params);

}  // namespace rodsim
