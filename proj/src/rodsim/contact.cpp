#include "contact.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace rodsim {

namespace {

constexpr double kDegenerate = 1e-24;  // squared length threshold

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

struct Aabb {
    Vec3 lo, hi;
};

Aabb edge_aabb(const VecX& q, const CollisionEdge& e) {
    const Vec3 p0 = q.segment<3>(e.base0), p1 = q.segment<3>(e.base1);
    return {p0.cwiseMin(p1), p0.cwiseMax(p1)};
}

double aabb_distance(const Aabb& a, const Aabb& b) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double gap = std::max({a.lo[k] - b.hi[k], b.lo[k] - a.hi[k], 0.0});
        d2 += gap * gap;
    }
    return std::sqrt(d2);
}

}  // namespace

SegmentClosest min_distance(const Vec3& a0, const Vec3& a1, const Vec3& b0, const Vec3& b1) {
    const Vec3 da = a1 - a0, db = b1 - b0, r = a0 - b0;
    const double la = da.squaredNorm(), lb = db.squaredNorm();
    if (la < kDegenerate || lb < kDegenerate)
        throw std::invalid_argument("degenerate segment in min_distance");

    const double f = db.dot(r);
    const double c = da.dot(r);
    const double b = da.dot(db);
    const double denom = la * lb - b * b;

    double s = (denom > 1e-14 * la * lb) ? clamp01((b * f - c * lb) / denom) : 0.0;
    double u = (b * s + f) / lb;
    if (u < 0.0) {
        u = 0.0;
        s = clamp01(-c / la);
    } else if (u > 1.0) {
        u = 1.0;
        s = clamp01((b - c) / la);
    }
    const Vec3 ca = a0 + s * da, cb = b0 + u * db;
    return {(cb - ca).norm(), s, u};
}

ContactEnergy1D imc_energy(double dist, double offset, double delta) {
    ContactEnergy1D out;
    const double k1 = 15.0 / delta;
    if (dist >= offset + delta) return out;
    if (dist <= offset - delta) {
        const double pen = offset - dist;
        out.e = pen * pen;
        out.de = -2.0 * pen;
        out.d2e = 2.0;
        return out;
    }
    const double x = k1 * (offset - dist);  // in (-15, 15)
    const double l = std::log1p(std::exp(x));
    const double sig = 1.0 / (1.0 + std::exp(-x));
    out.e = (l / k1) * (l / k1);
    out.de = -2.0 * l * sig / k1;
    out.d2e = 2.0 * (sig * sig + l * sig * (1.0 - sig));
    return out;
}

ContactZone classify_zone(double dist, double offset, double delta) {
    if (dist >= offset + delta) return ContactZone::inactive;
    if (dist <= offset - delta) return ContactZone::penetrating;
    return ContactZone::smooth;
}

ContactSet collision_candidates(const VecX& q, const std::vector<CollisionEdge>& edges,
                                const std::optional<FloorPlane>& floor,
                                const ContactParams& self_params,
                                const ContactParams& floor_params,
                                const std::vector<int>& rod_exclusion_window, double margin) {
    ContactSet set;
    const int ne = static_cast<int>(edges.size());
    std::vector<Aabb> boxes(ne);
    for (int i = 0; i < ne; ++i) boxes[i] = edge_aabb(q, edges[i]);

    for (int i = 0; i < ne; ++i) {
        for (int j = i + 1; j < ne; ++j) {
            const CollisionEdge& a = edges[i];
            const CollisionEdge& b = edges[j];
            if (a.rod == b.rod &&
                std::abs(a.edge - b.edge) <= rod_exclusion_window[a.rod])
                continue;
            // shared global node (also covers edges meeting at a joint)
            if (a.base0 == b.base0 || a.base0 == b.base1 || a.base1 == b.base0 ||
                a.base1 == b.base1)
                continue;
            const double offset = a.radius + b.radius;
            if (aabb_distance(boxes[i], boxes[j]) >= offset + self_params.delta + margin)
                continue;
            ContactPair p;
            p.kind = ContactPair::Kind::edge_edge;
            p.a = i;
            p.b = j;
            p.offset = offset;
            const SegmentClosest cl =
                min_distance(q.segment<3>(a.base0), q.segment<3>(a.base1),
                             q.segment<3>(b.base0), q.segment<3>(b.base1));
            p.dist = cl.dist;
            p.s = cl.s;
            p.u = cl.u;
            p.zone = classify_zone(p.dist, p.offset, self_params.delta);
            set.pairs.push_back(p);
        }
    }

    if (floor) {
        const Vec3 n = floor->normal.normalized();
        for (int i = 0; i < ne; ++i) {
            const CollisionEdge& e = edges[i];
            const double d0 = n.dot(q.segment<3>(e.base0)) - floor->offset;
            const double d1 = n.dot(q.segment<3>(e.base1)) - floor->offset;
            const double dist = std::min(d0, d1);
            if (dist >= e.radius + floor_params.delta + margin) continue;
            ContactPair p;
            p.kind = ContactPair::Kind::edge_floor;
            p.a = i;
            p.offset = e.radius;
            p.dist = dist;
            p.s = (d0 <= d1) ? 0.0 : 1.0;
            p.zone = classify_zone(dist, p.offset, floor_params.delta);
            set.pairs.push_back(p);
        }
    }
    return set;
}

PairContactTerms contact_terms(const Vec3& a0, const Vec3& a1, const Vec3& b0, const Vec3& b1,
                               const ContactPair& pair, const ContactParams& params,
                               bool with_hessian) {
    PairContactTerms out;
    const SegmentClosest cl = min_distance(a0, a1, b0, b1);
    const double dist = cl.dist, s = cl.s, u = cl.u;
    out.s = s;
    out.u = u;
    out.e1d = imc_energy(dist, pair.offset, params.delta);
    if (out.e1d.e == 0.0 && out.e1d.de == 0.0) return out;
    if (dist < 1e-12) return out;  // coincident centerlines: direction undefined

    const Vec3 da = a1 - a0, db = b1 - b0;
    const Vec3 ca = a0 + s * da, cb = b0 + u * db;
    const Vec3 n = (cb - ca) / dist;
    out.normal = n;

    const double w[4] = {-(1.0 - s), -s, 1.0 - u, u};  // dD/dq weights on n
    Eigen::Matrix<double, 12, 1>& gd = out.grad_dist;
    for (int k = 0; k < 4; ++k) gd.segment<3>(3 * k) = w[k] * n;

    const double kc = params.stiffness;
    out.energy = kc * out.e1d.e;
    out.force = -kc * out.e1d.de * gd;
    out.normal_force_mag = kc * std::abs(out.e1d.de);

    if (!with_hessian) return out;

    // Hessian of D: fixed-pattern part plus the Schur correction from the
    // dependence of the unclamped closest-point parameters on q.
    const Mat3 pi = (Mat3::Identity() - n * n.transpose()) / dist;
    Eigen::Matrix<double, 12, 12> hd;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) hd.block<3, 3>(3 * r, 3 * c) = (w[r] * w[c]) * pi;

    const bool s_free = (s > 1e-10 && s < 1.0 - 1e-10);
    const bool u_free = (u > 1e-10 && u < 1.0 - 1e-10);
    const int nf = (s_free ? 1 : 0) + (u_free ? 1 : 0);
    if (nf > 0) {
        Eigen::Matrix<double, 2, 2> yy;
        Eigen::Matrix<double, 2, 12> yq;
        int row = 0;
        int rows[2] = {-1, -1};
        const Vec3 pia = pi * da, pib = pi * db;
        if (s_free) {
            rows[row] = 0;
            yq.row(row).setZero();
            yq.block<1, 3>(row, 0) = ((1.0 - s) * pia + n).transpose();
            yq.block<1, 3>(row, 3) = (s * pia - n).transpose();
            yq.block<1, 3>(row, 6) = (-(1.0 - u) * pia).transpose();
            yq.block<1, 3>(row, 9) = (-u * pia).transpose();
            ++row;
        }
        if (u_free) {
            rows[row] = 1;
            yq.row(row).setZero();
            yq.block<1, 3>(row, 0) = (-(1.0 - s) * pib).transpose();
            yq.block<1, 3>(row, 3) = (-s * pib).transpose();
            yq.block<1, 3>(row, 6) = ((1.0 - u) * pib - n).transpose();
            yq.block<1, 3>(row, 9) = (u * pib + n).transpose();
            ++row;
        }
        const double f_ss = da.dot(pia), f_uu = db.dot(pib), f_su = -da.dot(pib);
        for (int r = 0; r < row; ++r)
            for (int c = 0; c < row; ++c)
                yy(r, c) = (rows[r] == rows[c]) ? (rows[r] == 0 ? f_ss : f_uu) : f_su;

        const auto yy_block = yy.topLeftCorner(row, row);
        const auto yq_block = yq.topRows(row);
        const Eigen::MatrixXd yy_inv_yq =
            yy_block.fullPivLu().isInvertible()
                ? Eigen::MatrixXd(yy_block.fullPivLu().solve(yq_block))
                : Eigen::MatrixXd::Zero(row, 12);
        hd -= yq_block.transpose() * yy_inv_yq;
    }

    out.hessian = kc * (out.e1d.d2e * gd * gd.transpose() + out.e1d.de * hd);
    return out;
}

FloorContactTerms floor_contact_terms(const Vec3& p0, const Vec3& p1, const FloorPlane& floor,
                                      double radius, const ContactParams& params,
                                      bool with_hessian) {
    FloorContactTerms out;
    const Vec3 n = floor.normal.normalized();
    const Vec3 pts[2] = {p0, p1};
    const double kc = params.stiffness;
    for (int k = 0; k < 2; ++k) {
        const double dist = n.dot(pts[k]) - floor.offset;
        const ContactEnergy1D e = imc_energy(dist, radius, params.delta);
        out.e1d[k] = e;
        out.energy += 0.5 * kc * e.e;
        out.force.segment<3>(3 * k) = -0.5 * kc * e.de * n;
        out.normal_force_mag[k] = 0.5 * kc * std::abs(e.de);
        if (with_hessian)
            out.hessian.block<3, 3>(3 * k, 3 * k) = 0.5 * kc * e.d2e * n * n.transpose();
    }
    return out;
}

double stick_slip_gamma(double speed, double k2) {
    return 2.0 / (1.0 + std::exp(-k2 * speed)) - 1.0;
}

FrictionKernel friction_kernel(const Vec3& v_rel, const Vec3& normal, double normal_force_mag,
                               const ContactParams& params, bool with_jacobian) {
    FrictionKernel out;
    const Mat3 pt = Mat3::Identity() - normal * normal.transpose();
    const Vec3 u = pt * v_rel;
    out.tangential = u;
    const double speed = u.norm();
    const double k2 = params.k2();
    const double mu = params.mu;

    if (speed < 1e-12) {
        // linear limit: gamma ~ k2*speed/2, so gamma*uhat -> (k2/2) u
        out.force = -mu * normal_force_mag * 0.5 * k2 * u;
        out.gamma = 0.0;
        if (with_jacobian) {
            out.dF_dvrel = -mu * normal_force_mag * 0.5 * k2 * pt;
            out.dF_dmag = -mu * 0.5 * k2 * u;
        }
        return out;
    }

    const double gamma = stick_slip_gamma(speed, k2);
    const Vec3 uhat = u / speed;
    out.gamma = gamma;
    out.force = -mu * gamma * normal_force_mag * uhat;
    if (with_jacobian) {
        const double dgamma = 0.5 * k2 * (1.0 - gamma * gamma);
        const Mat3 uu = uhat * uhat.transpose();
        out.dF_dvrel =
            -mu * normal_force_mag * (dgamma * uu + gamma / speed * (pt - uu));
        out.dF_dmag = -mu * gamma * uhat;
    }
    return out;
}

}  // namespace rodsim
