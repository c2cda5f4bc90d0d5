#pragma once

#include <optional>
#include <vector>

#include "material.hpp"
#include "types.hpp"

namespace rodsim {

// Rest-state quantities of a discretized rod. Interior nodes are 1..N-2.
struct RodGeometry {
    int node_count = 0;                    // N
    VecX rest_edge_len;                    // N-1
    VecX voronoi_len;                      // N-2, V_i = (e_{i-1} + e_i)/2
    std::vector<Vec2> natural_curvature;   // N-2, integrated units
    VecX natural_twist;                    // N-2 [rad]
    // interior stencils owned by a joint instead of the rod (empty: none)
    std::vector<uint8_t> stencil_disabled;

    int edge_count() const { return node_count - 1; }
    int interior_count() const { return node_count - 2; }
    int dof_count() const { return 4 * node_count - 1; }
    double length() const { return rest_edge_len.sum(); }
};

// Kinematic state: interleaved DOF vector plus per-edge frames.
// Layout: node i occupies q[4i..4i+2], twist angle of edge i occupies q[4i+3].
struct RodState {
    VecX q;                     // 4N-1
    VecX qdot;                  // 4N-1
    std::vector<Vec3> tangent;  // per edge, unit
    std::vector<Vec3> d1, d2;   // reference frame per edge
    std::vector<Vec3> m1, m2;   // material frame per edge
    VecX ref_twist;             // per interior node [rad]

    int node_count() const { return static_cast<int>((q.size() + 1) / 4); }
    int edge_count() const { return node_count() - 1; }

    Vec3 node(int i) const { return q.segment<3>(4 * i); }
    void set_node(int i, const Vec3& p) { q.segment<3>(4 * i) = p; }
    double theta(int i) const { return q[4 * i + 3]; }
    void set_theta(int i, double v) { q[4 * i + 3] = v; }

    Vec3 node_velocity(int i) const { return qdot.segment<3>(4 * i); }
};

struct Rod {
    RodGeometry geometry;
    RodState state;
    Material material;
};

// DOF index helpers for the interleaved layout.
inline int node_dof(int i) { return 4 * i; }
inline int theta_dof(int i) { return 4 * i + 3; }

// Rotate v from the plane of t_from into the plane of t_to about their common
// binormal. Norm-preserving; falls back to two half-rotations when the
// tangents are antiparallel.
Vec3 parallel_transport(const Vec3& v, const Vec3& t_from, const Vec3& t_to);

// Build a rod from its centerline. Natural curvature/twist default to the
// as-built values (stress-free as built) unless overridden.
Rod build_rod(const std::vector<Vec3>& node_positions, const Material& material,
              const std::optional<std::vector<Vec2>>& natural_curvature_override = std::nullopt);

// Recompute tangents from state.q, time-parallel-transport the reference
// frames from the previous frames stored in `state`, re-orthonormalize,
// update the reference twist with angle continuity, and rebuild the material
// frames from the twist DOFs.
void update_frames(RodState& state);

// Convenience: write new positions (and twists) into state.q, then update.
void update_frames(RodState& state, const VecX& new_q);

// Material frames from reference frames and twist angles; no transport.
void update_material_frames(RodState& state);

// Integrated curvature components of interior node i along the material
// directors (Eq. of the discrete curvature binormal).
Vec2 node_curvature(const RodState& state, int node_index);

// Discrete curvature binormal at interior node i.
Vec3 curvature_binormal(const RodState& state, int node_index);

}  // namespace rodsim
