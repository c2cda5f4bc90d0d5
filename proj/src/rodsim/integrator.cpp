#include "integrator.hpp"

#include <Eigen/SparseLU>
#include <cmath>

namespace rodsim {

namespace {

constexpr double kMinLineSearchAlpha = 1.0 / 1024.0;  // 2^-10

}  // namespace

Simulator::Simulator(Assembly& assembly, const SimConfig& config)
    : assembly_(&assembly), config_(config) {
    config_.validate();
    state_ = assembly.initial_state();
    scratch_ = state_;
    mass_ = assembly.lumped_mass();
    current_dt_ = config_.dt;
    rebuild_collision_edges();
}

void Simulator::rebuild_collision_edges() {
    collision_edges_.clear();
    exclusion_window_.assign(assembly_->rod_count(), 1);
    for (int r = 0; r < assembly_->rod_count(); ++r) {
        const Rod& rod = assembly_->rod(r);
        for (int e = 0; e < rod.geometry.edge_count(); ++e)
            collision_edges_.push_back({assembly_->node_base(r, e),
                                        assembly_->node_base(r, e + 1), r, e,
                                        rod.material.radius});
        // widen the neighbor exclusion when edges are shorter than the
        // self-contact distance, so straight rods are not self-colliding
        const double min_e = rod.geometry.rest_edge_len.minCoeff();
        const double c_self = 2.0 * rod.material.radius;
        exclusion_window_[r] =
            std::max(1, static_cast<int>(std::ceil((c_self + self_params_.delta) / min_e)));
    }
}

void Simulator::set_floor(const FloorPlane& plane, const ContactParams& params) {
    floor_ = plane;
    floor_params_ = params;
    contact_enabled_ = true;
    refresh_candidates(state_.q);
}

void Simulator::set_self_contact(const ContactParams& params) {
    self_contact_ = true;
    self_params_ = params;
    contact_enabled_ = true;
    rebuild_collision_edges();
    refresh_candidates(state_.q);
}

void Simulator::add_push(int rod, const Vec3& total_force) {
    pushes_.emplace_back(rod, total_force);
}

void Simulator::set_push(int rod, const Vec3& total_force) {
    for (auto& p : pushes_)
        if (p.first == rod) {
            p.second = total_force;
            return;
        }
    pushes_.emplace_back(rod, total_force);
}

void Simulator::refresh_candidates(const VecX& q) {
    if (!contact_enabled_) return;
    const double margin = std::max(self_params_.delta, floor_params_.delta);
    candidates_ = collision_candidates(
        q, self_contact_ ? collision_edges_ : std::vector<CollisionEdge>{},
        floor_, self_params_, floor_params_, exclusion_window_, margin);
    if (!self_contact_ && floor_) {
        // floor-only scenes still need the edge list for floor candidates
        candidates_ = collision_candidates(q, collision_edges_, floor_, self_params_,
                                           floor_params_, exclusion_window_, margin);
        std::erase_if(candidates_.pairs, [](const ContactPair& p) {
            return p.kind == ContactPair::Kind::edge_edge;
        });
    }
    q_at_broad_phase_ = q;
}

void Simulator::maybe_refresh_candidates(const VecX& q) {
    if (!contact_enabled_) return;
    const double delta = std::min(self_params_.delta, floor_params_.delta);
    const double moved = (q - q_at_broad_phase_).cwiseAbs().maxCoeff();
    if (moved > 0.5 * delta) refresh_candidates(q);
}

ContactSet Simulator::narrow_phase(const VecX& q) const {
    if (!contact_enabled_) return {};
    const double margin = std::max(self_params_.delta, floor_params_.delta);
    ContactSet set = collision_candidates(q, collision_edges_, floor_, self_params_,
                                          floor_params_, exclusion_window_, margin);
    if (!self_contact_)
        std::erase_if(set.pairs, [](const ContactPair& p) {
            return p.kind == ContactPair::Kind::edge_edge;
        });
    return set;
}

VecX Simulator::prescribed_at(double t) const {
    VecX targets = state_.q;
    if (prescribed_motion) prescribed_motion(t, targets);
    return targets;
}

// Total force (internal + external) at (q_eval, v_eval), and the contribution
// of the force to the Newton matrix dr/dq_next = -dF/dq_next. `chain` is the
// dq_eval/dq_next factor (1 backward Euler, 1/2 midpoint); velocities enter
// with dv/dq_next = 1/dt.
Simulator::ForceResult Simulator::compute_force(const VecX& q_eval, const VecX& v_eval,
                                                double chain, double dt, bool with_jacobian) {
    const int n = assembly_->dof_count();
    ForceResult out;

    scratch_ = state_;
    assembly_->sync_state(scratch_, q_eval);

    VecX& force = out.force;
    force = VecX::Zero(n);

    // elastic
    const TermOptions opts{with_jacobian, ExecMode::parallel};
    GlobalTerms el = assembly_->elastic_terms(scratch_, opts);
    force -= el.gradient;
    if (with_jacobian) {
        out.jac.reserve(el.hessian.size() + 16 * n);
        for (const auto& t : el.hessian)
            out.jac.emplace_back(t.row(), t.col(), chain * t.value());
    }

    // gravity
    const Vec3 g = config_.gravity;
    if (g.squaredNorm() > 0.0) {
        for (int r = 0; r < assembly_->rod_count(); ++r) {
            const Rod& rod = assembly_->rod(r);
            for (int i = 0; i < rod.geometry.node_count; ++i) {
                const int base = assembly_->node_base(r, i);
                // aliased nodes are visited once per rod; use this rod's share
                double share = 0.0;
                if (i > 0) share += 0.5 * rod.material.density * rod.material.area() *
                                    rod.geometry.rest_edge_len[i - 1];
                if (i < rod.geometry.node_count - 1)
                    share += 0.5 * rod.material.density * rod.material.area() *
                             rod.geometry.rest_edge_len[i];
                force.segment<3>(base) += share * g;
            }
        }
    }

    // uniform push forces, distributed by node mass share
    for (const auto& [rod_idx, f_total] : pushes_) {
        const Rod& rod = assembly_->rod(rod_idx);
        const double rod_mass = rod.material.density * rod.material.area() *
                                rod.geometry.rest_edge_len.sum();
        for (int i = 0; i < rod.geometry.node_count; ++i) {
            double share = 0.0;
            if (i > 0) share += 0.5 * rod.geometry.rest_edge_len[i - 1];
            if (i < rod.geometry.node_count - 1) share += 0.5 * rod.geometry.rest_edge_len[i];
            share *= rod.material.density * rod.material.area() / rod_mass;
            force.segment<3>(assembly_->node_base(rod_idx, i)) += share * f_total;
        }
    }

    // viscous damping -c M v
    if (config_.damping > 0.0) {
        force -= config_.damping * mass_.cwiseProduct(v_eval);
        if (with_jacobian) {
            const double cd = config_.damping / dt;
            for (int i = 0; i < n; ++i) out.jac.emplace_back(i, i, cd * mass_[i]);
        }
    }

    // contact and friction over the current candidate set
    if (contact_enabled_) {
        const VecX& qc = scratch_.q;
        for (const ContactPair& pair : candidates_.pairs) {
            if (pair.kind == ContactPair::Kind::edge_edge) {
                const CollisionEdge& ea = collision_edges_[pair.a];
                const CollisionEdge& eb = collision_edges_[pair.b];
                const int base[4] = {ea.base0, ea.base1, eb.base0, eb.base1};
                const PairContactTerms t = contact_terms(
                    qc.segment<3>(base[0]), qc.segment<3>(base[1]), qc.segment<3>(base[2]),
                    qc.segment<3>(base[3]), pair, self_params_, with_jacobian);
                if (t.energy == 0.0 && t.normal_force_mag == 0.0) continue;
                ++out.contact_pairs;
                out.contact_energy += t.energy;
                for (int k = 0; k < 4; ++k)
                    force.segment<3>(base[k]) += t.force.segment<3>(3 * k);
                if (with_jacobian) {
                    for (int a = 0; a < 4; ++a)
                        for (int b = 0; b < 4; ++b)
                            for (int ra = 0; ra < 3; ++ra)
                                for (int cb = 0; cb < 3; ++cb) {
                                    const double v = t.hessian(3 * a + ra, 3 * b + cb);
                                    if (v != 0.0)
                                        out.jac.emplace_back(base[a] + ra, base[b] + cb,
                                                             chain * v);
                                }
                }
                if (self_params_.mu > 0.0 && t.normal_force_mag > 0.0) {
                    const double wf[4] = {1.0 - t.s, t.s, -(1.0 - t.u), -t.u};
                    Vec3 v_rel = Vec3::Zero();
                    for (int k = 0; k < 4; ++k) v_rel += wf[k] * v_eval.segment<3>(base[k]);
                    const FrictionKernel fk = friction_kernel(v_rel, t.normal,
                                                              t.normal_force_mag, self_params_,
                                                              with_jacobian);
                    for (int k = 0; k < 4; ++k)
                        force.segment<3>(base[k]) += wf[k] * fk.force;
                    if (with_jacobian) {
                        const Eigen::Matrix<double, 12, 1> dmag_dq =
                            -self_params_.stiffness * t.e1d.d2e * t.grad_dist;
                        for (int a = 0; a < 4; ++a) {
                            const Mat3 dv = -(wf[a] / dt) * fk.dF_dvrel;
                            for (int b = 0; b < 4; ++b) {
                                const Mat3 blk = dv * wf[b];
                                const Vec3 dm = -chain * wf[a] * fk.dF_dmag;
                                for (int ra = 0; ra < 3; ++ra)
                                    for (int cb = 0; cb < 3; ++cb) {
                                        const double v =
                                            blk(ra, cb) + dm[ra] * dmag_dq[3 * b + cb];
                                        if (v != 0.0)
                                            out.jac.emplace_back(base[a] + ra, base[b] + cb, v);
                                    }
                            }
                        }
                    }
                }
            } else {  // edge_floor
                const CollisionEdge& ea = collision_edges_[pair.a];
                const int base[2] = {ea.base0, ea.base1};
                const FloorContactTerms t = floor_contact_terms(
                    qc.segment<3>(base[0]), qc.segment<3>(base[1]), *floor_, pair.offset,
                    floor_params_, with_jacobian);
                if (t.energy == 0.0) continue;
                ++out.contact_pairs;
                out.contact_energy += t.energy;
                const Vec3 n_plane = floor_->normal.normalized();
                for (int k = 0; k < 2; ++k) {
                    force.segment<3>(base[k]) += t.force.segment<3>(3 * k);
                    if (with_jacobian) {
                        const Mat3 blk = chain * t.hessian.block<3, 3>(3 * k, 3 * k);
                        for (int ra = 0; ra < 3; ++ra)
                            for (int cb = 0; cb < 3; ++cb)
                                if (blk(ra, cb) != 0.0)
                                    out.jac.emplace_back(base[k] + ra, base[k] + cb,
                                                         blk(ra, cb));
                    }
                    if (floor_params_.mu > 0.0 && t.normal_force_mag[k] > 0.0) {
                        const FrictionKernel fk =
                            friction_kernel(v_eval.segment<3>(base[k]), n_plane,
                                            t.normal_force_mag[k], floor_params_, with_jacobian);
                        force.segment<3>(base[k]) += fk.force;
                        if (with_jacobian) {
                            const Vec3 dmag_dp =
                                -0.5 * floor_params_.stiffness * t.e1d[k].d2e * n_plane;
                            const Mat3 blk2 = -fk.dF_dvrel / dt -
                                              chain * fk.dF_dmag * dmag_dp.transpose();
                            for (int ra = 0; ra < 3; ++ra)
                                for (int cb = 0; cb < 3; ++cb)
                                    if (blk2(ra, cb) != 0.0)
                                        out.jac.emplace_back(base[k] + ra, base[k] + cb,
                                                             blk2(ra, cb));
                        }
                    }
                }
            }
        }
    }

    return out;
}

Simulator::EvalResult Simulator::eval(const VecX& q_next, bool with_jacobian) {
    const int n = assembly_->dof_count();
    const double dt = eval_dt_;
    const bool midpoint = config_.integrator == IntegratorKind::implicit_midpoint;
    const double chain = midpoint ? 0.5 : 1.0;

    const VecX q_eval = midpoint ? VecX(0.5 * (q_next + state_.q)) : q_next;
    const VecX v_eval = (q_next - state_.q) / dt;

    ForceResult fr = compute_force(q_eval, v_eval, chain, dt, with_jacobian);

    EvalResult out;
    out.contact_pairs = fr.contact_pairs;
    out.contact_energy = fr.contact_energy;
    out.jac = std::move(fr.jac);
    out.r.resize(n);
    const double inertia_scale = midpoint ? 2.0 : 1.0;
    for (int i = 0; i < n; ++i) {
        out.r[i] = inertia_scale * (mass_[i] / dt) *
                       ((q_next[i] - state_.q[i]) / dt - state_.qdot[i]) -
                   fr.force[i];
    }
    if (with_jacobian) {
        const double mi = inertia_scale / (dt * dt);
        for (int i = 0; i < n; ++i) out.jac.emplace_back(i, i, mi * mass_[i]);
    }
    return out;
}

VecX Simulator::residual(const VecX& q_next) {
    eval_dt_ = current_dt_;
    return eval(q_next, false).r;
}

std::vector<int> Simulator::free_indices() const {
    std::vector<int> idx;
    const auto& fixed = assembly_->fixed_mask();
    for (int i = 0; i < assembly_->dof_count(); ++i)
        if (!fixed[i]) idx.push_back(i);
    return idx;
}

Eigen::SparseMatrix<double> Simulator::system_jacobian(const VecX& q_next) {
    eval_dt_ = current_dt_;
    const EvalResult ev = eval(q_next, true);
    const auto free = free_indices();
    std::vector<int> full_to_free(assembly_->dof_count(), -1);
    for (size_t k = 0; k < free.size(); ++k) full_to_free[free[k]] = static_cast<int>(k);
    std::vector<Eigen::Triplet<double>> reduced;
    reduced.reserve(ev.jac.size());
    for (const auto& t : ev.jac) {
        const int r = full_to_free[t.row()], c = full_to_free[t.col()];
        if (r >= 0 && c >= 0) reduced.emplace_back(r, c, t.value());
    }
    Eigen::SparseMatrix<double> j(free.size(), free.size());
    j.setFromTriplets(reduced.begin(), reduced.end());
    return j;
}

double Simulator::residual_scale() const {
    double grav = 0.0;
    const Vec3 g = config_.gravity;
    for (int r = 0; r < assembly_->rod_count(); ++r) {
        const Rod& rod = assembly_->rod(r);
        grav += rod.material.density * rod.material.area() * rod.geometry.length() * g.norm();
    }
    double elastic = 0.0;
    for (int r = 0; r < assembly_->rod_count(); ++r) {
        const Rod& rod = assembly_->rod(r);
        const double len = rod.geometry.length();
        elastic += 1e-3 * rod.material.ea() + rod.material.ei() / (len * len) +
                   rod.material.gj() / (len * len);
    }
    return std::max(grav + elastic, 1e-8);
}

StepStats Simulator::step() {
    if (pre_step) pre_step(state_.time + current_dt_);
    if (config_.integrator == IntegratorKind::verlet_explicit) return verlet_step(current_dt_);
    return newton_step(current_dt_);
}

StepStats Simulator::newton_step(double dt) {
    eval_dt_ = dt;
    StepStats stats;
    stats.dt_used = dt;
    const int n = assembly_->dof_count();
    const auto& fixed = assembly_->fixed_mask();
    const auto free = free_indices();
    std::vector<int> full_to_free(n, -1);
    for (size_t k = 0; k < free.size(); ++k) full_to_free[free[k]] = static_cast<int>(k);

    const VecX q_start = state_.q;
    const VecX targets = prescribed_at(state_.time + dt);
    VecX q = q_start;
    for (int i = 0; i < n; ++i)
        if (fixed[i]) q[i] = targets[i];
    for (int i = 0; i < n; ++i)
        if (!fixed[i]) q[i] += dt * state_.qdot[i];  // predictor

    refresh_candidates(q);
    const double tol = config_.newton_tol * residual_scale();

    const auto free_norm = [&](const VecX& r) {
        double s = 0.0;
        for (int i : free) s += r[i] * r[i];
        return std::sqrt(s);
    };

    bool converged = false;
    double rn = 0.0;
    for (int iter = 0; iter < config_.max_newton_iters; ++iter) {
        maybe_refresh_candidates(q);
        EvalResult ev = eval(q, true);
        rn = free_norm(ev.r);
        stats.residual_history.push_back(rn);
        stats.contact_pairs = ev.contact_pairs;
        if (rn < tol) {
            converged = true;
            break;
        }
        stats.newton_iterations = iter + 1;

        // reduced system
        std::vector<Eigen::Triplet<double>> reduced;
        reduced.reserve(ev.jac.size());
        for (const auto& t : ev.jac) {
            const int r = full_to_free[t.row()], c = full_to_free[t.col()];
            if (r >= 0 && c >= 0) reduced.emplace_back(r, c, t.value());
        }
        Eigen::SparseMatrix<double> jac(free.size(), free.size());
        jac.setFromTriplets(reduced.begin(), reduced.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(jac);
        if (lu.info() != Eigen::Success) throw SolveError("singular system in Newton solve");
        VecX r_free(free.size());
        for (size_t k = 0; k < free.size(); ++k) r_free[k] = ev.r[free[k]];
        const VecX dq_free = lu.solve(r_free);
        if (!dq_free.allFinite()) throw SolveError("linear solve produced non-finite update");

        double alpha = 1.0;
        bool accepted = false;
        while (alpha >= kMinLineSearchAlpha) {
            VecX q_trial = q;
            for (size_t k = 0; k < free.size(); ++k) q_trial[free[k]] -= alpha * dq_free[k];
            if (!config_.line_search) {
                q = q_trial;
                accepted = true;
                break;
            }
            const double rt = free_norm(eval(q_trial, false).r);
            if (rt < rn) {
                q = q_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
            ++stats.line_search_backtracks;
        }
        if (!accepted) break;  // no descent even at minimum step: give up
    }

    if (!converged) {
        stats.converged = false;
        return stats;
    }

    VecX qdot_new(n);
    const bool midpoint = config_.integrator == IntegratorKind::implicit_midpoint;
    for (int i = 0; i < n; ++i) {
        const double dq = (q[i] - q_start[i]) / dt;
        qdot_new[i] = midpoint ? 2.0 * dq - state_.qdot[i] : dq;
    }
    assembly_->sync_state(state_, q);
    state_.qdot = qdot_new;
    state_.time += dt;
    return stats;
}

// Position Verlet: half drift, full kick from forces at the half position
// (velocities explicit at the step start), half drift.
StepStats Simulator::verlet_step(double dt) {
    eval_dt_ = dt;
    StepStats stats;
    stats.dt_used = dt;
    const int n = assembly_->dof_count();
    const auto& fixed = assembly_->fixed_mask();

    const VecX qdot_start = state_.qdot;
    VecX q_half = state_.q;
    for (int i = 0; i < n; ++i)
        if (!fixed[i]) q_half[i] += 0.5 * dt * qdot_start[i];

    refresh_candidates(q_half);
    const ForceResult fr = compute_force(q_half, qdot_start, 1.0, dt, false);

    VecX qdot_new = qdot_start;
    VecX q_new = q_half;
    for (int i = 0; i < n; ++i) {
        if (fixed[i]) {
            qdot_new[i] = 0.0;
            continue;
        }
        qdot_new[i] += dt * fr.force[i] / mass_[i];
        q_new[i] += 0.5 * dt * qdot_new[i];
    }
    assembly_->sync_state(state_, q_new);
    state_.qdot = qdot_new;
    state_.time += dt;
    stats.contact_pairs = fr.contact_pairs;
    return stats;
}

StepStats Simulator::adaptive_step() {
    if (!config_.adaptive.enabled) return step();
    int reductions = 0;
    while (true) {
        StepStats stats = step();
        if (stats.converged) {
            stats.dt_reductions = reductions;
            ++success_streak_;
            if (current_dt_ < config_.dt &&
                success_streak_ >= config_.adaptive.successes_to_grow) {
                current_dt_ = std::min(config_.dt, current_dt_ * config_.adaptive.grow);
                success_streak_ = 0;
            }
            return stats;
        }
        success_streak_ = 0;
        if (current_dt_ <= config_.adaptive.min_dt * (1.0 + 1e-12)) {
            const double last_r =
                stats.residual_history.empty() ? -1.0 : stats.residual_history.back();
            throw SolveError("non-convergence at minimum dt=" + std::to_string(current_dt_) +
                             ", residual=" + std::to_string(last_r));
        }
        current_dt_ = std::max(config_.adaptive.min_dt, current_dt_ * config_.adaptive.shrink);
        ++reductions;
    }
}

double Simulator::kinetic_energy() const {
    return 0.5 * state_.qdot.cwiseProduct(state_.qdot).dot(mass_);
}

double Simulator::elastic_energy() const {
    return assembly_->elastic_terms(state_, {false, ExecMode::parallel}).energy;
}

double Simulator::gravity_energy() const {
    double e = 0.0;
    const Vec3 g = config_.gravity;
    if (g.squaredNorm() == 0.0) return 0.0;
    for (int r = 0; r < assembly_->rod_count(); ++r) {
        const Rod& rod = assembly_->rod(r);
        for (int i = 0; i < rod.geometry.node_count; ++i) {
            double share = 0.0;
            if (i > 0) share += 0.5 * rod.material.density * rod.material.area() *
                                rod.geometry.rest_edge_len[i - 1];
            if (i < rod.geometry.node_count - 1)
                share += 0.5 * rod.material.density * rod.material.area() *
                         rod.geometry.rest_edge_len[i];
            e -= share * g.dot(state_.q.segment<3>(assembly_->node_base(r, i)));
        }
    }
    return e;
}

double Simulator::contact_energy() const {
    if (!contact_enabled_) return 0.0;
    double e = 0.0;
    const ContactSet set = narrow_phase(state_.q);
    const VecX& q = state_.q;
    for (const ContactPair& pair : set.pairs) {
        if (pair.kind == ContactPair::Kind::edge_edge) {
            const CollisionEdge& ea = collision_edges_[pair.a];
            const CollisionEdge& eb = collision_edges_[pair.b];
            e += contact_terms(q.segment<3>(ea.base0), q.segment<3>(ea.base1),
                               q.segment<3>(eb.base0), q.segment<3>(eb.base1), pair,
                               self_params_, false)
                     .energy;
        } else {
            const CollisionEdge& ea = collision_edges_[pair.a];
            e += floor_contact_terms(q.segment<3>(ea.base0), q.segment<3>(ea.base1), *floor_,
                                     pair.offset, floor_params_, false)
                     .energy;
        }
    }
    return e;
}

double Simulator::mechanical_energy() const {
    return kinetic_energy() + elastic_energy() + gravity_energy() + contact_energy();
}

int Simulator::active_contact_count() const {
    const ContactSet set = narrow_phase(state_.q);
    return set.active_count();
}

double Simulator::max_penetration() const {
    if (!contact_enabled_) return 0.0;
    double pen = 0.0;
    const ContactSet set = narrow_phase(state_.q);
    const Vec3 n = floor_ ? floor_->normal.normalized() : Vec3(0, 0, 1);
    for (const ContactPair& pair : set.pairs) {
        if (pair.kind == ContactPair::Kind::edge_edge) {
            pen = std::max(pen, pair.offset - pair.dist);
        } else {
            const CollisionEdge& ea = collision_edges_[pair.a];
            const double d0 = n.dot(state_.q.segment<3>(ea.base0)) - floor_->offset;
            const double d1 = n.dot(state_.q.segment<3>(ea.base1)) - floor_->offset;
            pen = std::max(pen, pair.offset - std::min(d0, d1));
        }
    }
    return pen;
}

double Simulator::max_node_speed() const {
    double v = 0.0;
    for (int r = 0; r < assembly_->rod_count(); ++r)
        for (int i = 0; i < assembly_->rod(r).geometry.node_count; ++i)
            v = std::max(v, state_.qdot.segment<3>(assembly_->node_base(r, i)).norm());
    return v;
}

}  // namespace rodsim
