#include "real2sim.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "actuation.hpp"

namespace rodsim {

std::vector<CurvatureTarget> targets_from_markers(std::istream& in) {
    // (frame, limb) -> marker_index -> position
    std::map<int, std::map<int, std::map<int, Vec3>>> table;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        int frame, limb, idx;
        double x, y;
        if (!(ss >> frame >> limb >> idx >> x >> y)) {
            std::string rest;
            if (std::istringstream(line) >> rest && !rest.empty())
                throw std::invalid_argument("malformed marker row at line " +
                                            std::to_string(lineno));
            continue;  // blank line
        }
        double z = 0.0;
        ss >> z;  // optional
        table[frame][limb][idx] = Vec3(x, y, z);
    }
    if (table.empty()) throw std::invalid_argument("marker file holds no rows");

    std::vector<CurvatureTarget> out;
    for (const auto& [frame, limbs] : table) {
        CurvatureTarget tgt;
        for (const auto& [limb, markers] : limbs) {
            if (static_cast<int>(tgt.kappa_phys.size()) != limb)
                throw std::invalid_argument("limb indices must be dense from 0");
            if (markers.size() < 3)
                throw std::invalid_argument("limb " + std::to_string(limb) + " in frame " +
                                            std::to_string(frame) + " has fewer than 3 markers");
            std::vector<Vec3> pts;
            pts.reserve(markers.size());
            for (const auto& [idx, p] : markers) pts.push_back(p);

            // discrete curvature of the marker polyline, signed about the
            // polyline's mean binormal, averaged in physical units
            Vec3 binormal = Vec3::Zero();
            for (size_t i = 1; i + 1 < pts.size(); ++i)
                binormal += (pts[i] - pts[i - 1]).cross(pts[i + 1] - pts[i]);
            const bool planar_signed = binormal.norm() > 1e-12;
            if (planar_signed) binormal.normalize();

            double mean_phys = 0.0;
            for (size_t i = 1; i + 1 < pts.size(); ++i) {
                const Vec3 e0 = pts[i] - pts[i - 1];
                const Vec3 e1 = pts[i + 1] - pts[i];
                const double l0 = e0.norm(), l1 = e1.norm();
                if (l0 < 1e-12 || l1 < 1e-12)
                    throw std::invalid_argument("coincident markers");
                const Vec3 t0 = e0 / l0, t1 = e1 / l1;
                const double chi = 1.0 + t0.dot(t1);
                if (chi < 1e-6) throw std::invalid_argument("marker polyline folds back");
                const Vec3 kb = 2.0 * t0.cross(t1) / chi;
                const double voronoi = 0.5 * (l0 + l1);
                const double signed_mag = planar_signed ? kb.dot(binormal) : kb.norm();
                mean_phys += signed_mag / voronoi;
            }
            mean_phys /= static_cast<double>(pts.size() - 2);
            tgt.kappa_phys.push_back(mean_phys);
        }
        out.push_back(std::move(tgt));
    }
    return out;
}

std::vector<CurvatureTarget> targets_from_marker_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open marker file " + path);
    return targets_from_markers(in);
}

VecX settle_and_measure(const Real2SimProblem& problem, const VecX& kappa_bar,
                        const Real2SimParams& params, AssemblyState* settled_state) {
    SimInstance inst = problem.make_sim();
    Assembly& assembly = *inst.assembly;
    Simulator& sim = *inst.sim;
    for (size_t k = 0; k < problem.limbs.size(); ++k)
        set_natural_curvature(assembly, problem.limbs[k], Vec2(kappa_bar[k], 0.0));

    // damped dynamics to the quasistatic criterion
    while (sim.max_node_speed() >= params.settle_velocity || sim.time() == 0.0) {
        const StepStats stats = sim.config().adaptive.enabled ? sim.adaptive_step() : sim.step();
        if (!stats.converged) throw SolveError("settle step failed to converge");
        if (sim.time() > params.settle_max_time)
            throw SolveError("settle did not reach the velocity criterion in time");
    }

    VecX measured(problem.limbs.size());
    for (size_t k = 0; k < problem.limbs.size(); ++k)
        measured[k] = measure_limb_curvature(assembly, sim.state(), problem.limbs[k]);
    if (settled_state) *settled_state = sim.state();
    return measured;
}

Real2SimResult solve_natural_curvatures(const std::vector<VecX>& targets_integrated,
                                        const Real2SimProblem& problem,
                                        const Real2SimParams& params) {
    const int nl = static_cast<int>(problem.limbs.size());
    Real2SimResult result;
    VecX kappa_bar = VecX::Zero(nl);

    for (const VecX& target : targets_integrated) {
        if (target.size() != nl) throw std::invalid_argument("target size != limb count");
        if (!params.warm_start) kappa_bar.setZero();

        double alpha = params.alpha0;
        double loss_prev = std::numeric_limits<double>::infinity();
        double best_loss = std::numeric_limits<double>::infinity();
        VecX best_kappa = kappa_bar;
        Real2SimFrame frame;
        frame.converged = false;

        for (int iter = 0; iter < params.max_iters; ++iter) {
            const VecX measured = settle_and_measure(problem, kappa_bar, params);
            const double loss = (target - measured).cwiseAbs().sum();
            if (loss < best_loss) {
                best_loss = loss;
                best_kappa = kappa_bar;
            }
            if (loss < params.tolerance) {
                frame.converged = true;
                frame.iterations = iter;
                break;
            }
            if (loss > loss_prev) alpha *= 0.5;
            loss_prev = loss;

            // forward-difference loss gradient, one settle per coordinate
            VecX grad(nl);
            for (int k = 0; k < nl; ++k) {
                VecX probe = kappa_bar;
                probe[k] += params.epsilon;
                const VecX m = settle_and_measure(problem, probe, params);
                const double loss_k = (target - m).cwiseAbs().sum();
                grad[k] = (loss_k - loss) / params.epsilon;
            }
            kappa_bar -= alpha * grad;
            frame.iterations = iter + 1;
        }

        if (!frame.converged) kappa_bar = best_kappa;  // best-so-far on exhaustion
        frame.kappa_bar = kappa_bar;
        frame.loss = best_loss;
        result.frames.push_back(frame);
    }
    return result;
}

}  // namespace rodsim
