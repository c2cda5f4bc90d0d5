#include "actuation.hpp"

#include <algorithm>
#include <cmath>

namespace rodsim {

double curvature_from_angle(double phi_rad) {
    if (!(std::abs(phi_rad) < M_PI))
        throw std::invalid_argument("natural turning angle must satisfy |phi| < pi");
    return 2.0 * std::tan(0.5 * phi_rad);
}

namespace {

void check_rod(const Assembly& assembly, int rod) {
    if (rod < 0 || rod >= assembly.rod_count())
        throw std::invalid_argument("unknown limb " + std::to_string(rod));
}

double mean_voronoi(const RodGeometry& g) { return g.voronoi_len.mean(); }

}  // namespace

void set_natural_curvature(Assembly& assembly, int rod, const Vec2& kappa_integrated) {
    check_rod(assembly, rod);
    RodGeometry& g = assembly.rod(rod).geometry;
    const double vbar = mean_voronoi(g);
    for (int i = 0; i < g.interior_count(); ++i)
        g.natural_curvature[i] = kappa_integrated * (g.voronoi_len[i] / vbar);
}

void set_natural_angle(Assembly& assembly, int rod, const Vec2& phi_rad) {
    set_natural_curvature(assembly, rod,
                          Vec2(curvature_from_angle(phi_rad[0]), curvature_from_angle(phi_rad[1])));
}

double measure_limb_curvature(const Assembly& assembly, const AssemblyState& state, int rod) {
    check_rod(assembly, rod);
    const RodGeometry& g = assembly.rod(rod).geometry;
    if (g.interior_count() < 1) throw std::invalid_argument("limb has no interior node");
    const RodState& s = state.rods[rod];
    double phys = 0.0;
    for (int i = 1; i < g.node_count - 1; ++i)
        phys += node_curvature(s, i)[0] / g.voronoi_len[i - 1];
    phys /= g.interior_count();
    return phys * mean_voronoi(g);
}

double ActuationSchedule::scale_at(const Channel& ch, double t) {
    if (ch.keys.empty()) return 1.0;
    if (t <= ch.keys.front().first) return (t < ch.keys.front().first) ? 0.0 : ch.keys.front().second;
    if (t >= ch.keys.back().first) return ch.keys.back().second;
    for (size_t k = 1; k < ch.keys.size(); ++k) {
        if (t <= ch.keys[k].first) {
            if (!ch.linear) return ch.keys[k - 1].second;
            const double t0 = ch.keys[k - 1].first, t1 = ch.keys[k].first;
            const double s0 = ch.keys[k - 1].second, s1 = ch.keys[k].second;
            return s0 + (s1 - s0) * (t - t0) / (t1 - t0);
        }
    }
    return ch.keys.back().second;
}

void ActuationSchedule::apply(Assembly& assembly, double t) const {
    for (const Channel& ch : channels) {
        check_rod(assembly, ch.rod);
        RodGeometry& g = assembly.rod(ch.rod).geometry;
        if (static_cast<int>(ch.base_curvature.size()) != g.interior_count())
            throw std::invalid_argument("actuation pattern size mismatch");
        const double s = scale_at(ch, t);
        for (int i = 0; i < g.interior_count(); ++i)
            g.natural_curvature[i] = s * ch.base_curvature[i];
    }
}

ActuationSchedule::Channel ActuationSchedule::uniform(const Assembly& assembly, int rod,
                                                      const Vec2& kappa_integrated) {
    check_rod(assembly, rod);
    const RodGeometry& g = assembly.rod(rod).geometry;
    Channel ch;
    ch.rod = rod;
    const double vbar = g.voronoi_len.mean();
    ch.base_curvature.resize(g.interior_count());
    for (int i = 0; i < g.interior_count(); ++i)
        ch.base_curvature[i] = kappa_integrated * (g.voronoi_len[i] / vbar);
    return ch;
}

ActuationSchedule::Channel ActuationSchedule::uniform_angle(const Assembly& assembly, int rod,
                                                            const Vec2& phi_rad) {
    return uniform(assembly, rod,
                   Vec2(curvature_from_angle(phi_rad[0]), curvature_from_angle(phi_rad[1])));
}

}  // namespace rodsim
