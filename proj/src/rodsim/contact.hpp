#pragma once

#include <optional>
#include <vector>

#include "types.hpp"

namespace rodsim {

// Penalty-contact parameters. The smooth transition zone spans (C-delta,
// C+delta) around the contact distance C; K1/K2 are pinned to delta/nu.
// `stiffness` scales the contact energy into Joules (the published energy is
// a squared length); see the decisions ledger.
struct ContactParams {
    double delta = 5e-4;      // contact distance tolerance [m]
    double nu = 1e-3;         // slipping tolerance [m/s]
    double mu = 0.0;          // friction coefficient
    double stiffness = 1e4;   // contact energy scale [N/m]

    double k1() const { return 15.0 / delta; }
    double k2() const { return 15.0 / nu; }
};

enum class ContactZone { penetrating, smooth, inactive };

// A broad-phase candidate, refined by the narrow phase. `a`/`b` index the
// caller's collision-edge list; floor pairs use only `a`.
struct ContactPair {
    enum class Kind { edge_edge, edge_floor };
    Kind kind = Kind::edge_edge;
    int a = -1;
    int b = -1;
    double offset = 0.0;  // contact distance C (2h self, h floor)
    // narrow-phase results
    double dist = 0.0;
    double s = 0.0, u = 0.0;  // closest-point barycentric parameters
    ContactZone zone = ContactZone::inactive;
};

struct ContactSet {
    std::vector<ContactPair> pairs;
    int active_count() const {
        int n = 0;
        for (const auto& p : pairs)
            if (p.zone != ContactZone::inactive) ++n;
        return n;
    }
};

// One rod edge exposed to collision detection: global DOF base indices of its
// endpoint position triples, plus provenance for the exclusion rules.
struct CollisionEdge {
    int base0 = 0, base1 = 0;
    int rod = 0, edge = 0;
    double radius = 0.0;
};

// Infinite half-space floor: contact when n.x - offset < rod radius.
struct FloorPlane {
    Vec3 normal = Vec3(0, 0, 1);
    double offset = 0.0;
};

struct SegmentClosest {
    double dist = 0.0;
    double s = 0.0;  // barycentric on segment a
    double u = 0.0;  // barycentric on segment b
};

// Exact minimum distance between two segments with clamped closest-point
// parameters. Throws std::invalid_argument on degenerate segments.
SegmentClosest min_distance(const Vec3& a0, const Vec3& a1, const Vec3& b0, const Vec3& b1);

// Unscaled smooth penalty energy of Eq-10 form and its D-derivatives.
struct ContactEnergy1D {
    double e = 0.0, de = 0.0, d2e = 0.0;
};
ContactEnergy1D imc_energy(double dist, double offset, double delta);

ContactZone classify_zone(double dist, double offset, double delta);

// AABB broad phase over all edge pairs and the optional floor. Excludes pairs
// sharing a global node and pairs closer along the same rod than the
// per-rod exclusion window. Output is sorted and deterministic.
ContactSet collision_candidates(const VecX& q, const std::vector<CollisionEdge>& edges,
                                const std::optional<FloorPlane>& floor,
                                const ContactParams& self_params,
                                const ContactParams& floor_params,
                                const std::vector<int>& rod_exclusion_window, double margin);

// Contact energy/force/Hessian of one edge-edge pair on its 12 position DOFs
// ordered [a0 a1 b0 b1]. force = -dE/dq.
struct PairContactTerms {
    double energy = 0.0;
    Eigen::Matrix<double, 12, 1> force = Eigen::Matrix<double, 12, 1>::Zero();
    Eigen::Matrix<double, 12, 12> hessian = Eigen::Matrix<double, 12, 12>::Zero();  // d2E/dq2
    double normal_force_mag = 0.0;
    Vec3 normal = Vec3::Zero();                                                  // from a toward b
    Eigen::Matrix<double, 12, 1> grad_dist = Eigen::Matrix<double, 12, 1>::Zero();
    ContactEnergy1D e1d;
    double s = 0.0, u = 0.0;  // closest-point parameters at evaluation
};
PairContactTerms contact_terms(const Vec3& a0, const Vec3& a1, const Vec3& b0, const Vec3& b1,
                               const ContactPair& pair, const ContactParams& params,
                               bool with_hessian);

// Same for an edge-floor pair: the penalty acts on the plane distance of each
// endpoint with weight 1/2, on 6 DOFs ordered [p0 p1].
struct FloorContactTerms {
    double energy = 0.0;
    Eigen::Matrix<double, 6, 1> force = Eigen::Matrix<double, 6, 1>::Zero();
    Eigen::Matrix<double, 6, 6> hessian = Eigen::Matrix<double, 6, 6>::Zero();
    double normal_force_mag[2] = {0.0, 0.0};  // per endpoint
    ContactEnergy1D e1d[2];
};
FloorContactTerms floor_contact_terms(const Vec3& p0, const Vec3& p1, const FloorPlane& floor,
                                      double radius, const ContactParams& params,
                                      bool with_hessian);

// Smooth stick-slip scaling factor, gamma(0) = 0, gamma -> 1 for fast sliding.
double stick_slip_gamma(double speed, double k2);

// Friction force at one contact: relative tangential velocity u of side A
// against side B, force -mu*gamma*uhat*|Fcon| on A (opposite on B).
// dF_dv is the derivative of the A-side force w.r.t. the relative velocity;
// dF_dmag w.r.t. the normal force magnitude.
struct FrictionKernel {
    Vec3 force = Vec3::Zero();        // on side A
    Mat3 dF_dvrel = Mat3::Zero();
    Vec3 dF_dmag = Vec3::Zero();
    double gamma = 0.0;
    Vec3 tangential = Vec3::Zero();   // u
};
FrictionKernel friction_kernel(const Vec3& v_rel, const Vec3& normal, double normal_force_mag,
                               const ContactParams& params, bool with_jacobian);

}  // namespace rodsim
