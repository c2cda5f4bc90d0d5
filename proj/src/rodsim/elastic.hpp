#pragma once

#include "banded.hpp"
#include "geometry.hpp"

namespace rodsim {

// Execution mode of the element kernels. Both modes produce bitwise-identical
// results: locals are computed per element (independently, optionally across
// threads) and scattered serially in element order.
enum class ExecMode { serial, parallel };

struct TermOptions {
    bool with_hessian = true;
    ExecMode mode = ExecMode::serial;
};

// Energy, gradient, and banded Hessian of one rod's elastic terms, in the
// rod-local interleaved DOF indexing. The elastic force is -gradient.
struct ElasticTerms {
    double energy = 0.0;
    VecX gradient;
    BandedSym hessian;
    bool has_hessian = false;

    explicit ElasticTerms(int dof_count = 0, bool with_hessian = false)
        : gradient(VecX::Zero(dof_count)), has_hessian(with_hessian) {
        if (with_hessian) hessian = BandedSym(dof_count, 10);
    }

    ElasticTerms& operator+=(const ElasticTerms& other);
};

using CurvaturePair = Vec2;  // (kappa1, kappa2) integrated curvature components

CurvaturePair curvature(const RodState& state, int node_index);

ElasticTerms stretch_terms(const RodState& state, const RodGeometry& geom,
                           const Material& mat, const TermOptions& opts = {});
ElasticTerms bend_terms(const RodState& state, const RodGeometry& geom,
                        const Material& mat, const TermOptions& opts = {});
ElasticTerms twist_terms(const RodState& state, const RodGeometry& geom,
                         const Material& mat, const TermOptions& opts = {});
ElasticTerms elastic_total(const RodState& state, const RodGeometry& geom,
                           const Material& mat, const TermOptions& opts = {});

// --- element-level pieces, shared with the joint module ---

// Gradient and Hessian of the integrated curvature pair of a two-edge stencil
// [x0, th_e, x1, th_f, x2] (local indices 0..10). All inputs are the current
// tangents/frames of the two edges oriented x0 -> x1 -> x2.
struct CurvatureStencil {
    Vec2 kappa;
    Eigen::Matrix<double, 11, 1> grad_kappa1, grad_kappa2;
    Eigen::Matrix<double, 11, 11> hess_kappa1, hess_kappa2;
};

CurvatureStencil curvature_stencil(const Vec3& x0, const Vec3& x1, const Vec3& x2,
                                   const Vec3& m1e, const Vec3& m2e,
                                   const Vec3& m1f, const Vec3& m2f, bool with_hessian);

// Gradient and Hessian of the twist strain tau = th_f - th_e + ref_twist on
// the same stencil. Only the holonomy part depends on positions.
struct TwistStencil {
    double tau;
    Eigen::Matrix<double, 11, 1> grad_tau;
    Eigen::Matrix<double, 11, 11> hess_tau;
};

TwistStencil twist_stencil(const Vec3& x0, const Vec3& x1, const Vec3& x2,
                           double theta_e, double theta_f, double ref_twist,
                           bool with_hessian);

}  // namespace rodsim
