#include "geometry.hpp"

#include <cmath>

namespace rodsim {

namespace {

constexpr double kDegenerateEdge = 1e-12;
constexpr double kAntiparallel = 1e-6;

// Unit vector orthogonal to t, built from the global axis with the smallest
// |t| component. Deterministic and never near-parallel to t.
Vec3 orthogonal_seed(const Vec3& t) {
    int axis = 0;
    double best = std::abs(t[0]);
    for (int k = 1; k < 3; ++k) {
        if (std::abs(t[k]) < best) {
            best = std::abs(t[k]);
            axis = k;
        }
    }
    Vec3 a = Vec3::Zero();
    a[axis] = 1.0;
    return t.cross(a).normalized();
}

}  // namespace

Vec3 parallel_transport(const Vec3& v, const Vec3& t_from, const Vec3& t_to) {
    const double c = t_from.dot(t_to);
    if (c < -1.0 + kAntiparallel) {
        // Antiparallel tangents: the binormal is ill-defined. Compose two
        // half-rotations through an axis orthogonal to t_from.
        const Vec3 mid = orthogonal_seed(t_from);
        return parallel_transport(parallel_transport(v, t_from, mid), mid, t_to);
    }
    Vec3 b = t_from.cross(t_to);
    const double b_norm = b.norm();
    if (b_norm < 1e-14) return v;  // tangents coincide
    b /= b_norm;
    // Orthonormal pair in each tangent plane sharing the binormal.
    const Vec3 n_from = t_from.cross(b);
    const Vec3 n_to = t_to.cross(b);
    return v.dot(t_from) * t_to + v.dot(n_from) * n_to + v.dot(b) * b;
}

Rod build_rod(const std::vector<Vec3>& node_positions, const Material& material,
              const std::optional<std::vector<Vec2>>& natural_curvature_override) {
    const int n = static_cast<int>(node_positions.size());
    if (n < 3) throw std::invalid_argument("rod needs at least 3 nodes");

    Rod rod;
    rod.material = material;
    RodGeometry& g = rod.geometry;
    RodState& s = rod.state;

    g.node_count = n;
    g.rest_edge_len.resize(n - 1);
    s.q = VecX::Zero(4 * n - 1);
    s.qdot = VecX::Zero(4 * n - 1);
    for (int i = 0; i < n; ++i) s.set_node(i, node_positions[i]);

    s.tangent.resize(n - 1);
    for (int i = 0; i < n - 1; ++i) {
        const Vec3 e = node_positions[i + 1] - node_positions[i];
        const double len = e.norm();
        if (len < kDegenerateEdge) throw DegenerateEdgeError("coincident consecutive nodes");
        g.rest_edge_len[i] = len;
        s.tangent[i] = e / len;
    }

    g.voronoi_len.resize(n - 2);
    for (int i = 1; i < n - 1; ++i)
        g.voronoi_len[i - 1] = 0.5 * (g.rest_edge_len[i - 1] + g.rest_edge_len[i]);

    // Seed the reference frame on edge 0, then chain by space parallel
    // transport. Gram-Schmidt against the tangent after every transport.
    s.d1.resize(n - 1);
    s.d2.resize(n - 1);
    s.d1[0] = orthogonal_seed(s.tangent[0]);
    s.d2[0] = s.tangent[0].cross(s.d1[0]);
    for (int i = 1; i < n - 1; ++i) {
        Vec3 d = parallel_transport(s.d1[i - 1], s.tangent[i - 1], s.tangent[i]);
        d -= d.dot(s.tangent[i]) * s.tangent[i];
        s.d1[i] = d.normalized();
        s.d2[i] = s.tangent[i].cross(s.d1[i]);
    }

    s.m1 = s.d1;  // theta = 0
    s.m2 = s.d2;
    s.ref_twist = VecX::Zero(n - 2);  // space transport is twist-free by construction

    g.natural_twist = VecX::Zero(n - 2);
    if (natural_curvature_override) {
        if (static_cast<int>(natural_curvature_override->size()) != n - 2)
            throw std::invalid_argument("natural curvature override has wrong size");
        g.natural_curvature = *natural_curvature_override;
    } else {
        g.natural_curvature.resize(n - 2);
        for (int i = 1; i < n - 1; ++i) g.natural_curvature[i - 1] = node_curvature(s, i);
    }
    return rod;
}

void update_material_frames(RodState& state) {
    const int ne = state.edge_count();
    for (int i = 0; i < ne; ++i) {
        const double c = std::cos(state.theta(i)), sn = std::sin(state.theta(i));
        state.m1[i] = c * state.d1[i] + sn * state.d2[i];
        state.m2[i] = -sn * state.d1[i] + c * state.d2[i];
    }
}

void update_frames(RodState& state) {
    const int ne = state.edge_count();
    for (int i = 0; i < ne; ++i) {
        const Vec3 e = state.node(i + 1) - state.node(i);
        const double len = e.norm();
        if (len < kDegenerateEdge) throw DegenerateEdgeError("degenerate edge in update_frames");
        const Vec3 t_new = e / len;
        Vec3 d = parallel_transport(state.d1[i], state.tangent[i], t_new);
        d -= d.dot(t_new) * t_new;
        state.d1[i] = d.normalized();
        state.d2[i] = t_new.cross(state.d1[i]);
        state.tangent[i] = t_new;
    }
    // Reference twist: signed angle from the space-transported d1 of the
    // previous edge to this edge's d1, measured about the shared tangent.
    // Updated incrementally from the stored value so accumulated twist
    // beyond pi stays continuous.
    for (int i = 1; i < ne; ++i) {
        Vec3 u = parallel_transport(state.d1[i - 1], state.tangent[i - 1], state.tangent[i]);
        u = rotate_about_axis(u, state.tangent[i], state.ref_twist[i - 1]);
        state.ref_twist[i - 1] += signed_angle(u, state.d1[i], state.tangent[i]);
    }
    update_material_frames(state);
}

void update_frames(RodState& state, const VecX& new_q) {
    state.q = new_q;
    update_frames(state);
}

Vec3 curvature_binormal(const RodState& state, int node_index) {
    const Vec3& te = state.tangent[node_index - 1];
    const Vec3& tf = state.tangent[node_index];
    const double chi = 1.0 + te.dot(tf);
    if (chi < kAntiparallel)
        throw AntiparallelEdgeError("antiparallel adjacent tangents at node " +
                                    std::to_string(node_index));
    return 2.0 * te.cross(tf) / chi;
}

Vec2 node_curvature(const RodState& state, int node_index) {
    const Vec3 kb = curvature_binormal(state, node_index);
    const int e = node_index - 1, f = node_index;
    return Vec2(0.5 * kb.dot(state.m2[e] + state.m2[f]),
                -0.5 * kb.dot(state.m1[e] + state.m1[f]));
}

}  // namespace rodsim
