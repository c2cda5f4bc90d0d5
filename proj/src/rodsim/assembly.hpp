#pragma once

#include <Eigen/SparseCore>
#include <optional>
#include <vector>

#include "elastic.hpp"
#include "geometry.hpp"

namespace rodsim {

enum class RodEnd { start, end };

// Parametric rod construction (explicit nodes, straight line, or helix).
struct RodSpec {
    enum class Shape { explicit_nodes, line, helix };
    Shape shape = Shape::explicit_nodes;
    std::vector<Vec3> nodes;  // explicit_nodes
    Vec3 a = Vec3::Zero(), b = Vec3::Zero();  // line endpoints
    // helix: wound about `axis` through `center`, starting at `phase`
    Vec3 center = Vec3::Zero();
    Vec3 axis = Vec3(0, 0, 1);
    double helix_radius = 0.0, pitch = 0.0, contour_length = 0.0, phase = 0.0;
    int node_count = 0;
    Material material;
    std::optional<std::vector<Vec2>> natural_curvature;
};

std::vector<Vec3> rod_spec_centerline(const RodSpec& spec);

// One edge incident to a joint node. `sign` is +1 when the edge starts at the
// joint (its stored tangent already points away from it).
struct JointEdge {
    int rod = 0, edge = 0;
    int far_node = 0;  // rod-local node index at the far end
    double sign = 1.0;
};

// Bending/twisting couple between two incident edges, evaluated as if the
// pair were consecutive edges of one rod walked far(p) -> joint -> far(q).
struct JointPair {
    int in_edge = 0, out_edge = 0;  // indices into ElasticJoint::edges
    Vec2 natural_curvature = Vec2::Zero();
    double natural_twist = 0.0;
    double ref_twist_init = 0.0;  // seed of the pair's reference-twist chain
    double ei = 0.0, gj = 0.0;    // mean pair stiffness
    double voronoi = 0.0;
};

struct ElasticJoint {
    int host_rod = 0, host_node = 0;
    std::vector<JointEdge> edges;
    std::vector<JointPair> pairs;
};

// Dynamic state of an assembly: the flat DOF vector plus per-rod frame caches
// and the per-joint-pair reference twist accumulators.
struct AssemblyState {
    VecX q, qdot;
    std::vector<RodState> rods;
    std::vector<VecX> joint_ref_twist;
    double time = 0.0;
};

struct GlobalTerms {
    double energy = 0.0;
    VecX gradient;
    std::vector<Eigen::Triplet<double>> hessian;

    explicit GlobalTerms(int dofs = 0) : gradient(VecX::Zero(dofs)) {}
};

// A multi-rod system with elastic joints, shared DOF slots at joint nodes,
// lumped mass, and a fixed-DOF mask. Create rods and joints first; the global
// DOF map is rebuilt after every topology change.
class Assembly {
public:
    int add_rod(Rod rod);
    int add_rod(const RodSpec& spec);

    // Aliases rod_b's end node onto rod_a's node_a (positions must coincide
    // within 1e-9 m) and records bending/twisting couples for every pair of
    // incident edges. Returns the joint handle.
    int create_joint(int rod_a, int node_a, int rod_b, RodEnd end_b);

    int rod_count() const { return static_cast<int>(rods_.size()); }
    const Rod& rod(int r) const { return rods_[r]; }
    Rod& rod(int r) { return rods_[r]; }
    const std::vector<ElasticJoint>& joints() const { return joints_; }

    int dof_count() const { return dof_count_; }
    int node_base(int rod, int node) const { return node_base_[rod][node]; }
    int theta_index(int rod, int edge) const { return theta_index_[rod][edge]; }
    const std::vector<int>& rod_dof_map(int rod) const { return local_to_global_[rod]; }

    // Diagonal lumped mass: half of each edge's mass to each endpoint, and
    // rho*J*len/2 to each twist DOF.
    VecX lumped_mass() const;

    void fix_node(int rod, int node);
    void fix_theta(int rod, int edge);
    void clamp_end(int rod, RodEnd end);  // two nodes + the boundary twist
    const std::vector<uint8_t>& fixed_mask() const { return fixed_; }
    std::vector<uint8_t>& fixed_mask() { return fixed_; }

    AssemblyState initial_state() const;

    // Write q_new into the state: scatter to rod-local DOFs, transport rod
    // frames from the frames currently cached in `state`, and update the
    // joint reference twists incrementally.
    void sync_state(AssemblyState& state, const VecX& q_new) const;

    GlobalTerms elastic_terms(const AssemblyState& state, const TermOptions& opts = {}) const;
    GlobalTerms joint_terms(const AssemblyState& state, const TermOptions& opts = {}) const;

private:
    void rebuild_dof_map();
    void add_joint_pair(int joint, int in_edge, int out_edge);
    VecX gather_rod_q(const AssemblyState& state, int r) const;

    std::vector<Rod> rods_;
    std::vector<ElasticJoint> joints_;
    // (rod, node) -> representative (rod, node) for aliased joint nodes
    std::vector<std::vector<std::pair<int, int>>> alias_;
    std::vector<std::vector<int>> node_base_;
    std::vector<std::vector<int>> theta_index_;
    std::vector<std::vector<int>> local_to_global_;
    std::vector<uint8_t> fixed_;
    int dof_count_ = 0;
};

}  // namespace rodsim
