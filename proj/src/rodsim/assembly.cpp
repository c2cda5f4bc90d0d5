#include "assembly.hpp"

#include <algorithm>
#include <cmath>

namespace rodsim {

namespace {

Vec3 axis_orthogonal(const Vec3& t) {
    int axis = 0;
    double best = std::abs(t[0]);
    for (int k = 1; k < 3; ++k)
        if (std::abs(t[k]) < best) {
            best = std::abs(t[k]);
            axis = k;
        }
    Vec3 a = Vec3::Zero();
    a[axis] = 1.0;
    return t.cross(a).normalized();
}

// Oriented frames of a joint edge: traversal against the stored direction
// flips (m1, m2, t) to (m1, -m2, -t).
struct OrientedEdge {
    Vec3 t, d1, m1, m2;
    double theta_sign;
};

OrientedEdge orient_edge(const RodState& s, int edge, double traversal_sign) {
    OrientedEdge o;
    o.t = traversal_sign * s.tangent[edge];
    o.d1 = s.d1[edge];
    o.m1 = s.m1[edge];
    o.m2 = traversal_sign * s.m2[edge];
    o.theta_sign = traversal_sign;
    return o;
}

}  // namespace

std::vector<Vec3> rod_spec_centerline(const RodSpec& spec) {
    switch (spec.shape) {
        case RodSpec::Shape::explicit_nodes:
            return spec.nodes;
        case RodSpec::Shape::line: {
            if (spec.node_count < 3) throw std::invalid_argument("line rod needs >= 3 nodes");
            std::vector<Vec3> nodes(spec.node_count);
            for (int i = 0; i < spec.node_count; ++i)
                nodes[i] = spec.a + (spec.b - spec.a) * (double(i) / (spec.node_count - 1));
            return nodes;
        }
        case RodSpec::Shape::helix: {
            if (spec.node_count < 3) throw std::invalid_argument("helix rod needs >= 3 nodes");
            const Vec3 k = spec.axis.normalized();
            const Vec3 u = axis_orthogonal(k);
            const Vec3 v = k.cross(u);
            const double turn = std::sqrt(std::pow(2 * M_PI * spec.helix_radius, 2) +
                                          spec.pitch * spec.pitch);
            const double total_angle = 2 * M_PI * spec.contour_length / turn;
            std::vector<Vec3> nodes(spec.node_count);
            for (int i = 0; i < spec.node_count; ++i) {
                const double phi = total_angle * i / (spec.node_count - 1);
                nodes[i] = spec.center +
                           spec.helix_radius * (std::cos(phi + spec.phase) * u +
                                                std::sin(phi + spec.phase) * v) +
                           (spec.pitch * phi / (2 * M_PI)) * k;
            }
            return nodes;
        }
    }
    throw std::invalid_argument("unknown rod shape");
}

int Assembly::add_rod(Rod rod) {
    const int r = static_cast<int>(rods_.size());
    const int n = rod.geometry.node_count;
    rods_.push_back(std::move(rod));
    alias_.emplace_back();
    alias_.back().reserve(n);
    for (int i = 0; i < n; ++i) alias_.back().emplace_back(r, i);
    rebuild_dof_map();
    return r;
}

int Assembly::add_rod(const RodSpec& spec) {
    return add_rod(build_rod(rod_spec_centerline(spec), spec.material, spec.natural_curvature));
}

int Assembly::create_joint(int rod_a, int node_a, int rod_b, RodEnd end_b) {
    if (rod_a < 0 || rod_a >= rod_count() || rod_b < 0 || rod_b >= rod_count())
        throw std::invalid_argument("joint rod handle out of range");
    const Rod& ra = rods_[rod_a];
    const Rod& rb = rods_[rod_b];
    if (node_a < 0 || node_a >= ra.geometry.node_count)
        throw std::invalid_argument("joint node out of range");
    const int node_b = (end_b == RodEnd::start) ? 0 : rb.geometry.node_count - 1;

    if ((ra.state.node(node_a) - rb.state.node(node_b)).norm() > 1e-9)
        throw JointError("joined nodes do not coincide");

    // union by lexicographic order so representatives come first in DOF order
    auto resolve = [&](std::pair<int, int> p) {
        while (alias_[p.first][p.second] != p) p = alias_[p.first][p.second];
        return p;
    };
    const auto rep_a = resolve({rod_a, node_a});
    const auto rep_b = resolve({rod_b, node_b});
    const auto root = std::min(rep_a, rep_b);
    alias_[rep_a.first][rep_a.second] = root;
    alias_[rep_b.first][rep_b.second] = root;

    // find or create the joint anchored at the representative node
    int j = -1;
    for (int k = 0; k < static_cast<int>(joints_.size()); ++k) {
        const auto rep_host = resolve({joints_[k].host_rod, joints_[k].host_node});
        if (rep_host == root) {
            j = k;
            break;
        }
    }
    if (j < 0) {
        ElasticJoint joint;
        joint.host_rod = rod_a;
        joint.host_node = node_a;
        // incident edges of the host rod
        if (node_a > 0) joint.edges.push_back({rod_a, node_a - 1, node_a - 1, -1.0});
        if (node_a < ra.geometry.node_count - 1)
            joint.edges.push_back({rod_a, node_a, node_a + 1, +1.0});
        joints_.push_back(std::move(joint));
        j = static_cast<int>(joints_.size()) - 1;
        // the host's own interior stencil (if any) moves into the joint,
        // keeping the rod's configured natural curvature and twist
        if (node_a > 0 && node_a < ra.geometry.node_count - 1) {
            auto& dis = rods_[rod_a].geometry.stencil_disabled;
            if (dis.empty()) dis.assign(ra.geometry.interior_count(), 0);
            dis[node_a - 1] = 1;
            add_joint_pair(j, 0, 1);
            JointPair& host_pair = joints_[j].pairs.back();
            host_pair.natural_curvature = ra.geometry.natural_curvature[node_a - 1];
            host_pair.natural_twist = ra.geometry.natural_twist[node_a - 1];
            host_pair.ref_twist_init = ra.state.ref_twist[node_a - 1];
        }
    }

    JointEdge attached;
    attached.rod = rod_b;
    if (end_b == RodEnd::start) {
        attached.edge = 0;
        attached.far_node = 1;
        attached.sign = +1.0;
    } else {
        attached.edge = rb.geometry.node_count - 2;
        attached.far_node = rb.geometry.node_count - 2;
        attached.sign = -1.0;
    }

    // pair the new edge with every edge already incident
    const int new_index = static_cast<int>(joints_[j].edges.size());
    joints_[j].edges.push_back(attached);
    for (int e = 0; e < new_index; ++e) add_joint_pair(j, e, new_index);

    rebuild_dof_map();
    return j;
}

void Assembly::add_joint_pair(int j, int in_edge, int out_edge) {
    ElasticJoint& joint = joints_[j];
    JointPair pair;
    pair.in_edge = in_edge;
    pair.out_edge = out_edge;
    const JointEdge& pe = joint.edges[in_edge];
    const JointEdge& qe = joint.edges[out_edge];
    const Rod& rp = rods_[pe.rod];
    const Rod& rq = rods_[qe.rod];
    pair.ei = 0.5 * (rp.material.ei() + rq.material.ei());
    pair.gj = 0.5 * (rp.material.gj() + rq.material.gj());
    pair.voronoi =
        0.5 * (rp.geometry.rest_edge_len[pe.edge] + rq.geometry.rest_edge_len[qe.edge]);

    // as-built natural curvature and twist (stress-free as assembled)
    const double sp = -pe.sign;  // traversal into the joint
    const double sq = qe.sign;   // traversal out of the joint
    const OrientedEdge op = orient_edge(rp.state, pe.edge, sp);
    const OrientedEdge oq = orient_edge(rq.state, qe.edge, sq);
    const Vec3 x0 = rp.state.node(pe.far_node);
    const Vec3 x1 = rp.state.node((pe.sign > 0) ? pe.far_node - 1 : pe.far_node + 1);
    const Vec3 x2 = rq.state.node(qe.far_node);
    const CurvatureStencil st = curvature_stencil(x0, x1, x2, op.m1, op.m2, oq.m1, oq.m2, false);
    pair.natural_curvature = st.kappa;
    const Vec3 u0 = parallel_transport(op.d1, op.t, oq.t);
    const double beta0 = signed_angle(u0, oq.d1, oq.t);
    pair.ref_twist_init = beta0;
    pair.natural_twist = sq * rq.state.theta(qe.edge) - sp * rp.state.theta(pe.edge) + beta0;
    joint.pairs.push_back(pair);
}

void Assembly::rebuild_dof_map() {
    auto resolve = [&](std::pair<int, int> p) {
        while (alias_[p.first][p.second] != p) p = alias_[p.first][p.second];
        return p;
    };
    node_base_.assign(rods_.size(), {});
    theta_index_.assign(rods_.size(), {});
    int next = 0;
    for (int r = 0; r < rod_count(); ++r) {
        const int n = rods_[r].geometry.node_count;
        node_base_[r].assign(n, -1);
        theta_index_[r].assign(n - 1, -1);
        for (int i = 0; i < n; ++i) {
            const auto root = resolve({r, i});
            if (root == std::make_pair(r, i)) {
                node_base_[r][i] = next;
                next += 3;
            }
            if (i < n - 1) {
                theta_index_[r][i] = next;
                next += 1;
            }
        }
        // second pass for aliased nodes (their roots are earlier in order)
        for (int i = 0; i < n; ++i) {
            if (node_base_[r][i] < 0) {
                const auto root = resolve({r, i});
                node_base_[r][i] = node_base_[root.first][root.second];
            }
        }
    }
    dof_count_ = next;
    fixed_.assign(dof_count_, 0);

    local_to_global_.assign(rods_.size(), {});
    for (int r = 0; r < rod_count(); ++r) {
        const int n = rods_[r].geometry.node_count;
        std::vector<int>& map = local_to_global_[r];
        map.assign(4 * n - 1, -1);
        for (int i = 0; i < n; ++i) {
            for (int a = 0; a < 3; ++a) map[4 * i + a] = node_base_[r][i] + a;
            if (i < n - 1) map[4 * i + 3] = theta_index_[r][i];
        }
    }
}

VecX Assembly::lumped_mass() const {
    VecX m = VecX::Zero(dof_count_);
    for (int r = 0; r < rod_count(); ++r) {
        const Rod& rod = rods_[r];
        const double rho = rod.material.density;
        const double area = rod.material.area();
        const double jrho = rod.material.polar_inertia();
        for (int e = 0; e < rod.geometry.edge_count(); ++e) {
            const double len = rod.geometry.rest_edge_len[e];
            const double half = 0.5 * rho * area * len;
            for (int a = 0; a < 3; ++a) {
                m[node_base_[r][e] + a] += half;
                m[node_base_[r][e + 1] + a] += half;
            }
            m[theta_index_[r][e]] += 0.5 * rho * jrho * len;
        }
    }
    return m;
}

void Assembly::fix_node(int rod, int node) {
    if (rod < 0 || rod >= rod_count() || node < 0 || node >= rods_[rod].geometry.node_count)
        throw std::invalid_argument("fix_node selector out of range");
    for (int a = 0; a < 3; ++a) fixed_[node_base_[rod][node] + a] = 1;
}

void Assembly::fix_theta(int rod, int edge) {
    if (rod < 0 || rod >= rod_count() || edge < 0 || edge >= rods_[rod].geometry.edge_count())
        throw std::invalid_argument("fix_theta selector out of range");
    fixed_[theta_index_[rod][edge]] = 1;
}

void Assembly::clamp_end(int rod, RodEnd end) {
    const int n = rods_[rod].geometry.node_count;
    if (end == RodEnd::start) {
        fix_node(rod, 0);
        fix_node(rod, 1);
        fix_theta(rod, 0);
    } else {
        fix_node(rod, n - 1);
        fix_node(rod, n - 2);
        fix_theta(rod, n - 2);
    }
}

AssemblyState Assembly::initial_state() const {
    AssemblyState st;
    st.q = VecX::Zero(dof_count_);
    st.qdot = VecX::Zero(dof_count_);
    st.rods.reserve(rods_.size());
    for (int r = 0; r < rod_count(); ++r) {
        st.rods.push_back(rods_[r].state);
        const int n = rods_[r].geometry.node_count;
        for (int i = 0; i < n; ++i)
            st.q.segment<3>(node_base_[r][i]) = rods_[r].state.node(i);
        for (int e = 0; e < n - 1; ++e)
            st.q[theta_index_[r][e]] = rods_[r].state.theta(e);
    }
    st.joint_ref_twist.reserve(joints_.size());
    for (const ElasticJoint& j : joints_) {
        VecX tw(j.pairs.size());
        for (size_t k = 0; k < j.pairs.size(); ++k) tw[k] = j.pairs[k].ref_twist_init;
        st.joint_ref_twist.push_back(tw);
    }
    return st;
}

VecX Assembly::gather_rod_q(const AssemblyState& state, int r) const {
    const int n = rods_[r].geometry.node_count;
    VecX q(4 * n - 1);
    for (int i = 0; i < n; ++i) q.segment<3>(4 * i) = state.q.segment<3>(node_base_[r][i]);
    for (int e = 0; e < n - 1; ++e) q[4 * e + 3] = state.q[theta_index_[r][e]];
    return q;
}

void Assembly::sync_state(AssemblyState& state, const VecX& q_new) const {
    state.q = q_new;
    for (int r = 0; r < rod_count(); ++r) update_frames(state.rods[r], gather_rod_q(state, r));
    for (size_t j = 0; j < joints_.size(); ++j) {
        const ElasticJoint& joint = joints_[j];
        for (size_t k = 0; k < joint.pairs.size(); ++k) {
            const JointPair& pair = joint.pairs[k];
            const JointEdge& pe = joint.edges[pair.in_edge];
            const JointEdge& qe = joint.edges[pair.out_edge];
            const OrientedEdge op = orient_edge(state.rods[pe.rod], pe.edge, -pe.sign);
            const OrientedEdge oq = orient_edge(state.rods[qe.rod], qe.edge, qe.sign);
            Vec3 u = parallel_transport(op.d1, op.t, oq.t);
            u = rotate_about_axis(u, oq.t, state.joint_ref_twist[j][k]);
            state.joint_ref_twist[j][k] += signed_angle(u, oq.d1, oq.t);
        }
    }
}

GlobalTerms Assembly::elastic_terms(const AssemblyState& state, const TermOptions& opts) const {
    GlobalTerms out(dof_count_);
    for (int r = 0; r < rod_count(); ++r) {
        const ElasticTerms t =
            elastic_total(state.rods[r], rods_[r].geometry, rods_[r].material, opts);
        out.energy += t.energy;
        const std::vector<int>& map = local_to_global_[r];
        for (int i = 0; i < t.gradient.size(); ++i) out.gradient[map[i]] += t.gradient[i];
        if (opts.with_hessian) t.hessian.append_triplets(out.hessian, map);
    }
    const GlobalTerms jt = joint_terms(state, opts);
    out.energy += jt.energy;
    out.gradient += jt.gradient;
    out.hessian.insert(out.hessian.end(), jt.hessian.begin(), jt.hessian.end());
    return out;
}

GlobalTerms Assembly::joint_terms(const AssemblyState& state, const TermOptions& opts) const {
    GlobalTerms out(dof_count_);
    using Vec11 = Eigen::Matrix<double, 11, 1>;
    using Mat11 = Eigen::Matrix<double, 11, 11>;

    for (size_t j = 0; j < joints_.size(); ++j) {
        const ElasticJoint& joint = joints_[j];
        for (size_t k = 0; k < joint.pairs.size(); ++k) {
            const JointPair& pair = joint.pairs[k];
            const JointEdge& pe = joint.edges[pair.in_edge];
            const JointEdge& qe = joint.edges[pair.out_edge];
            const RodState& sp_state = state.rods[pe.rod];
            const RodState& sq_state = state.rods[qe.rod];
            const double sp = -pe.sign, sq = qe.sign;
            const OrientedEdge op = orient_edge(sp_state, pe.edge, sp);
            const OrientedEdge oq = orient_edge(sq_state, qe.edge, sq);

            const int joint_node_p = (pe.sign > 0) ? pe.far_node - 1 : pe.far_node + 1;
            const Vec3 x0 = sp_state.node(pe.far_node);
            const Vec3 x1 = sp_state.node(joint_node_p);
            const Vec3 x2 = sq_state.node(qe.far_node);

            // local -> global DOF map of the pair stencil
            int map[11];
            const int b0 = node_base_[pe.rod][pe.far_node];
            const int b1 = node_base_[pe.rod][joint_node_p];
            const int b2 = node_base_[qe.rod][qe.far_node];
            for (int a = 0; a < 3; ++a) {
                map[a] = b0 + a;
                map[4 + a] = b1 + a;
                map[8 + a] = b2 + a;
            }
            map[3] = theta_index_[pe.rod][pe.edge];
            map[7] = theta_index_[qe.rod][qe.edge];

            Vec11 grad = Vec11::Zero();
            Mat11 hess = Mat11::Zero();
            double energy = 0.0;

            {  // bending
                const CurvatureStencil st =
                    curvature_stencil(x0, x1, x2, op.m1, op.m2, oq.m1, oq.m2, opts.with_hessian);
                const Vec2 dk = st.kappa - pair.natural_curvature;
                const double w = pair.ei / pair.voronoi;
                energy += 0.5 * w * dk.squaredNorm();
                grad += w * (dk[0] * st.grad_kappa1 + dk[1] * st.grad_kappa2);
                if (opts.with_hessian)
                    hess += w * (st.grad_kappa1 * st.grad_kappa1.transpose() +
                                 st.grad_kappa2 * st.grad_kappa2.transpose() +
                                 dk[0] * st.hess_kappa1 + dk[1] * st.hess_kappa2);
            }
            {  // twisting with the per-pair reference twist chain
                const double theta_e = sp * sp_state.theta(pe.edge);
                const double theta_f = sq * sq_state.theta(qe.edge);
                const TwistStencil st = twist_stencil(x0, x1, x2, theta_e, theta_f,
                                                      state.joint_ref_twist[j][k],
                                                      opts.with_hessian);
                const double dtau = st.tau - pair.natural_twist;
                const double w = pair.gj / pair.voronoi;
                energy += 0.5 * w * dtau * dtau;
                grad += w * dtau * st.grad_tau;
                if (opts.with_hessian)
                    hess += w * (st.grad_tau * st.grad_tau.transpose() + dtau * st.hess_tau);
            }

            // chain rule from oriented twist angles back to the stored ones
            grad[3] *= sp;
            grad[7] *= sq;
            if (opts.with_hessian) {
                hess.row(3) *= sp;
                hess.col(3) *= sp;
                hess.row(7) *= sq;
                hess.col(7) *= sq;
            }

            out.energy += energy;
            for (int a = 0; a < 11; ++a) out.gradient[map[a]] += grad[a];
            if (opts.with_hessian) {
                for (int a = 0; a < 11; ++a)
                    for (int b = 0; b < 11; ++b)
                        if (hess(a, b) != 0.0)
                            out.hessian.emplace_back(map[a], map[b],
                                                     0.5 * (hess(a, b) + hess(b, a)));
            }
        }
    }
    return out;
}

}  // namespace rodsim
