#include <doctest.h>

#include <cmath>
#include <random>

#include "rodsim/contact.hpp"
#include "test_util.hpp"

using namespace rodsim;
using namespace rodsim::testutil;

namespace {

// Dense-sampling oracle: closest distance over a grid of point pairs, with
// grid refinement around the incumbent to reach ~1e-7 resolution.
double brute_force_distance(const Vec3& a0, const Vec3& a1, const Vec3& b0, const Vec3& b1,
                            int samples = 100) {
    double lo_s = 0.0, hi_s = 1.0, lo_u = 0.0, hi_u = 1.0;
    double best = std::numeric_limits<double>::infinity();
    for (int level = 0; level < 4; ++level) {
        double best_s = lo_s, best_u = lo_u;
        for (int i = 0; i <= samples; ++i) {
            const double s = lo_s + (hi_s - lo_s) * i / samples;
            const Vec3 pa = a0 + (a1 - a0) * s;
            for (int j = 0; j <= samples; ++j) {
                const double u = lo_u + (hi_u - lo_u) * j / samples;
                const Vec3 pb = b0 + (b1 - b0) * u;
                const double d = (pb - pa).norm();
                if (d < best) {
                    best = d;
                    best_s = s;
                    best_u = u;
                }
            }
        }
        const double ws = 2.0 * (hi_s - lo_s) / samples, wu = 2.0 * (hi_u - lo_u) / samples;
        lo_s = std::max(0.0, best_s - ws);
        hi_s = std::min(1.0, best_s + ws);
        lo_u = std::max(0.0, best_u - wu);
        hi_u = std::min(1.0, best_u + wu);
    }
    return best;
}

Vec3 rand_vec(std::mt19937& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    return Vec3(u(rng), u(rng), u(rng));
}

}  // namespace

TEST_CASE("min_distance basics") {
    // parallel unit segments offset by 0.1
    const auto r = min_distance(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 0.1, 0), Vec3(1, 0.1, 0));
    CHECK(r.dist == doctest::Approx(0.1).epsilon(1e-12));

    // crossing perpendicular segments touching at midpoints
    const auto c = min_distance(Vec3(-1, 0, 0), Vec3(1, 0, 0), Vec3(0, -1, 0), Vec3(0, 1, 0));
    CHECK(c.dist == doctest::Approx(0.0));

    CHECK_THROWS_AS(min_distance(Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)),
                    std::invalid_argument);
}

TEST_CASE("min_distance matches brute-force oracle on random segment pairs") {
    std::mt19937 rng(2024);
    for (int k = 0; k < 60; ++k) {
        const Vec3 a0 = rand_vec(rng), a1 = a0 + rand_vec(rng);
        const Vec3 b0 = rand_vec(rng), b1 = b0 + rand_vec(rng);
        if ((a1 - a0).norm() < 1e-3 || (b1 - b0).norm() < 1e-3) continue;
        const auto got = min_distance(a0, a1, b0, b1);
        const double want = brute_force_distance(a0, a1, b0, b1);
        CHECK(std::abs(got.dist - want) < 1e-6);
        // symmetry in arguments
        const auto swapped = min_distance(b0, b1, a0, a1);
        CHECK(got.dist == doctest::Approx(swapped.dist).epsilon(1e-12));
    }
}

TEST_CASE("contact energy branch values and continuity") {
    const double delta = 5e-4, c = 0.01;
    // boundary of the inactive zone
    CHECK(imc_energy(c + delta, c, delta).e == 0.0);
    // first branch at D = C - delta
    CHECK(imc_energy(c - delta, c, delta).e == doctest::Approx(delta * delta).epsilon(1e-12));
    // middle branch at D = C
    const double k1 = 15.0 / delta;
    CHECK(imc_energy(c, c, delta).e ==
          doctest::Approx(std::pow(std::log(2.0) / k1, 2)).epsilon(1e-12));

    // branch continuity at both seams, relative 1e-5
    const double e_pen = std::pow(c - (c - delta), 2);  // delta^2 from branch 1
    const double e_smooth_lo = imc_energy((c - delta) + 1e-15, c, delta).e;
    CHECK(rel_err(e_smooth_lo, e_pen) < 1e-5);
    const double e_smooth_hi = imc_energy((c + delta) - 1e-15, c, delta).e;
    CHECK(std::abs(e_smooth_hi) / (delta * delta) < 1e-5);

    // derivative consistency within branches by finite difference
    for (double d : {c - 2 * delta, c - 0.3 * delta, c + 0.4 * delta}) {
        const double h = 1e-9;
        const auto e = imc_energy(d, c, delta);
        const double fd = (imc_energy(d + h, c, delta).e - imc_energy(d - h, c, delta).e) / (2 * h);
        CHECK(rel_err(e.de, fd, 1e-14) < 1e-5);
        const double fd2 =
            (imc_energy(d + h, c, delta).de - imc_energy(d - h, c, delta).de) / (2 * h);
        CHECK(rel_err(e.d2e, fd2, 1e-14) < 1e-5);
    }
}

TEST_CASE("contact force and hessian match finite differences through the distance") {
    std::mt19937 rng(7);
    ContactParams params;
    params.delta = 5e-4;
    params.stiffness = 1e4;

    int tested = 0;
    while (tested < 40) {
        // segments near contact, away from clamping boundaries
        const Vec3 a0 = rand_vec(rng, 0.02), a1 = a0 + rand_vec(rng, 0.05);
        const Vec3 mid = 0.5 * (a0 + a1);
        Vec3 dir = rand_vec(rng).normalized();
        const Vec3 b_mid = mid + dir * 0.009;
        Vec3 bdir = rand_vec(rng, 0.05);
        const Vec3 b0 = b_mid - bdir, b1 = b_mid + bdir;
        if ((a1 - a0).norm() < 1e-3 || (b1 - b0).norm() < 1e-3) continue;

        ContactPair pair;
        pair.offset = 0.01;
        const auto cl = min_distance(a0, a1, b0, b1);
        if (cl.dist >= pair.offset + params.delta || cl.dist < 1e-4) continue;
        // stay away from barycentric clamping boundaries
        const double margin = 0.05;
        const bool s_interior = cl.s > margin && cl.s < 1 - margin;
        const bool u_interior = cl.u > margin && cl.u < 1 - margin;
        if (!(s_interior && u_interior)) continue;

        const auto terms = contact_terms(a0, a1, b0, b1, pair, params, true);
        if (terms.energy == 0.0) continue;
        ++tested;

        Eigen::Matrix<double, 12, 1> x;
        x << a0, a1, b0, b1;
        const auto energy_at = [&](const Eigen::Matrix<double, 12, 1>& y) {
            return contact_terms(y.segment<3>(0), y.segment<3>(3), y.segment<3>(6),
                                 y.segment<3>(9), pair, params, false)
                .energy;
        };
        const double h = 1e-7;
        Eigen::Matrix<double, 12, 1> fd_force;
        for (int i = 0; i < 12; ++i) {
            auto xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            fd_force[i] = -(energy_at(xp) - energy_at(xm)) / (2 * h);
        }
        const double fscale = std::max(fd_force.cwiseAbs().maxCoeff(), 1e-10);
        CHECK((terms.force - fd_force).cwiseAbs().maxCoeff() / fscale < 1e-5);

        // Hessian vs FD of the analytic force
        Eigen::Matrix<double, 12, 12> fd_hess;
        for (int i = 0; i < 12; ++i) {
            auto xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const auto fp = contact_terms(xp.segment<3>(0), xp.segment<3>(3), xp.segment<3>(6),
                                          xp.segment<3>(9), pair, params, false)
                                .force;
            const auto fm = contact_terms(xm.segment<3>(0), xm.segment<3>(3), xm.segment<3>(6),
                                          xm.segment<3>(9), pair, params, false)
                                .force;
            fd_hess.col(i) = -(fp - fm) / (2 * h);
        }
        const double hscale = std::max(fd_hess.cwiseAbs().maxCoeff(), 1e-10);
        CHECK((terms.hessian - fd_hess).cwiseAbs().maxCoeff() / hscale < 1e-4);
    }
}

TEST_CASE("Newton's third law on pair forces") {
    std::mt19937 rng(99);
    ContactParams params;
    int tested = 0;
    while (tested < 50) {
        const Vec3 a0 = rand_vec(rng, 0.02), a1 = a0 + rand_vec(rng, 0.04);
        const Vec3 b0 = rand_vec(rng, 0.02), b1 = b0 + rand_vec(rng, 0.04);
        if ((a1 - a0).norm() < 1e-3 || (b1 - b0).norm() < 1e-3) continue;
        ContactPair pair;
        pair.offset = 0.02;
        const auto terms = contact_terms(a0, a1, b0, b1, pair, params, false);
        if (terms.normal_force_mag == 0.0) continue;
        ++tested;
        const Vec3 on_a = terms.force.segment<3>(0) + terms.force.segment<3>(3);
        const Vec3 on_b = terms.force.segment<3>(6) + terms.force.segment<3>(9);
        CHECK((on_a + on_b).norm() < 1e-10 * std::max(1.0, on_a.norm()));
    }
}

TEST_CASE("friction: gamma properties and force bound") {
    ContactParams params;
    params.mu = 0.4;

    // gamma(0) = 0 exactly
    CHECK(stick_slip_gamma(0.0, params.k2()) == 0.0);
    // gamma at the slipping tolerance
    CHECK(stick_slip_gamma(params.nu, params.k2()) ==
          doctest::Approx(2.0 / (1.0 + std::exp(-15.0)) - 1.0).epsilon(1e-12));
    // monotone in speed (strict until saturating to 1 in double precision)
    double prev = -1.0;
    for (double v = 0.0; v < 0.02; v += 1e-4) {
        const double g = stick_slip_gamma(v, params.k2());
        CHECK(g >= prev);
        if (prev < 1.0) CHECK(g > prev);
        prev = g;
    }

    std::mt19937 rng(5);
    for (int k = 0; k < 1000; ++k) {
        const Vec3 n = rand_vec(rng).normalized();
        const Vec3 v = rand_vec(rng, 0.05);
        const double mag = std::abs(rand_vec(rng).x()) * 10.0;
        const auto fk = friction_kernel(v, n, mag, params, false);
        CHECK(fk.force.norm() <= params.mu * mag * (1.0 + 1e-12));
        // antiparallel to the tangential velocity
        if (fk.tangential.norm() > 1e-9) {
            const double cosang =
                fk.force.dot(fk.tangential) / (fk.force.norm() * fk.tangential.norm() + 1e-300);
            CHECK(cosang == doctest::Approx(-1.0).epsilon(1e-10));
        }
    }

    // zero relative velocity: exactly zero force, no NaNs
    const auto fk0 = friction_kernel(Vec3::Zero(), Vec3(0, 0, 1), 5.0, params, true);
    CHECK(fk0.force.norm() == 0.0);
    CHECK(fk0.dF_dvrel.allFinite());

    // fast sliding saturates at mu*|Fcon|
    const auto fast = friction_kernel(Vec3(1.0, 0, 0), Vec3(0, 0, 1), 5.0, params, false);
    CHECK(fast.force.norm() == doctest::Approx(params.mu * 5.0).epsilon(1e-9));
}

TEST_CASE("collision candidates: far apart rods give empty set, floor lists near edges") {
    // two short edges far apart
    VecX q(16);
    q.segment<3>(0) = Vec3(0, 0, 0);
    q.segment<3>(4) = Vec3(0.1, 0, 0);
    q.segment<3>(8) = Vec3(5, 5, 5);
    q.segment<3>(12) = Vec3(5.1, 5, 5);
    std::vector<CollisionEdge> edges = {{0, 4, 0, 0, 0.01}, {8, 12, 1, 0, 0.01}};
    ContactParams params;
    const std::vector<int> window = {1, 1};
    auto set = collision_candidates(q, edges, std::nullopt, params, params, window, 1e-3);
    CHECK(set.pairs.empty());

    // add a floor just below the first edge
    FloorPlane floor;
    floor.offset = -0.0101;
    set = collision_candidates(q, edges, floor, params, params, window, 1e-3);
    REQUIRE(set.pairs.size() == 1);
    CHECK(set.pairs[0].kind == ContactPair::Kind::edge_floor);
    CHECK(set.pairs[0].a == 0);
}

TEST_CASE("collision candidates are a superset of the exact active set") {
    std::mt19937 rng(31);
    // a dense cloud of edges
    const int ne = 40;
    VecX q(ne * 8);
    std::vector<CollisionEdge> edges;
    for (int i = 0; i < ne; ++i) {
        const Vec3 p0 = rand_vec(rng, 0.05);
        const Vec3 p1 = p0 + rand_vec(rng, 0.03);
        q.segment<3>(8 * i) = p0;
        q.segment<3>(8 * i + 4) = p1;
        edges.push_back({8 * i, 8 * i + 4, i, 0, 0.005});
    }
    ContactParams params;
    const std::vector<int> window(ne, 1);
    const auto set = collision_candidates(q, edges, std::nullopt, params, params, window, 1e-3);

    // exact check by all-pairs narrow phase
    for (int i = 0; i < ne; ++i) {
        for (int j = i + 1; j < ne; ++j) {
            const auto cl = min_distance(q.segment<3>(8 * i), q.segment<3>(8 * i + 4),
                                         q.segment<3>(8 * j), q.segment<3>(8 * j + 4));
            const double offset = 0.01;
            if (cl.dist < offset + params.delta) {
                bool found = false;
                for (const auto& p : set.pairs)
                    if (p.a == i && p.b == j) found = true;
                CHECK(found);
            }
        }
    }
}

TEST_CASE("floor contact terms: smooth, weighted per endpoint") {
    FloorPlane floor;
    ContactParams params;
    params.stiffness = 1e4;
    const double h = 0.025;
    // edge lying flat, slightly into the smooth zone
    const double z = h - 0.2 * params.delta;
    const auto t =
        floor_contact_terms(Vec3(0, 0, z), Vec3(0.04, 0, z), floor, h, params, true);
    CHECK(t.energy > 0.0);
    // both endpoints share the load equally
    CHECK(t.force.segment<3>(0).z() == doctest::Approx(t.force.segment<3>(3).z()));
    CHECK(t.force.segment<3>(0).z() > 0.0);
    // force matches the 1D derivative: half weight per endpoint
    const auto e = imc_energy(z, h, params.delta);
    CHECK(t.force.segment<3>(0).z() ==
          doctest::Approx(-0.5 * params.stiffness * e.de).epsilon(1e-12));
}
