#include "elastic.hpp"

#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rodsim {

namespace {

// Below this element count the parallel path gains nothing.
constexpr int kParallelThreshold = 256;

using Vec11 = Eigen::Matrix<double, 11, 1>;
using Mat11 = Eigen::Matrix<double, 11, 11>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

struct StretchLocal {
    double energy = 0.0;
    Vec6 grad = Vec6::Zero();
    Mat6 hess = Mat6::Zero();
};

struct StencilLocal {
    double energy = 0.0;
    Vec11 grad = Vec11::Zero();
    Mat11 hess = Mat11::Zero();
};

// Map the (e, f) edge-vector derivative blocks of a two-edge stencil onto the
// node positions x0, x1, x2 (e = x1 - x0, f = x2 - x1).
void scatter_position_blocks(Mat11& h, const Mat3& de2, const Mat3& df2, const Mat3& dedf) {
    const Mat3 dfde = dedf.transpose();
    h.block<3, 3>(0, 0) += de2;
    h.block<3, 3>(0, 4) += -de2 + dedf;
    h.block<3, 3>(0, 8) += -dedf;
    h.block<3, 3>(4, 0) += -de2 + dfde;
    h.block<3, 3>(4, 4) += de2 - dedf - dfde + df2;
    h.block<3, 3>(4, 8) += dedf - df2;
    h.block<3, 3>(8, 0) += -dfde;
    h.block<3, 3>(8, 4) += dfde - df2;
    h.block<3, 3>(8, 8) += df2;
}

// Same mapping for a mixed position/theta column (3-vectors per edge block).
void scatter_theta_cross(Mat11& h, int theta_col, const Vec3& de_dth, const Vec3& df_dth) {
    const Vec3 x0 = -de_dth;
    const Vec3 x1 = de_dth - df_dth;
    const Vec3 x2 = df_dth;
    h.block<3, 1>(0, theta_col) += x0;
    h.block<3, 1>(4, theta_col) += x1;
    h.block<3, 1>(8, theta_col) += x2;
    h.block<1, 3>(theta_col, 0) += x0.transpose();
    h.block<1, 3>(theta_col, 4) += x1.transpose();
    h.block<1, 3>(theta_col, 8) += x2.transpose();
}

void scatter_edge_grad(Vec11& g, const Vec3& de, const Vec3& df) {
    g.segment<3>(0) += -de;
    g.segment<3>(4) += de - df;
    g.segment<3>(8) += df;
}

StretchLocal stretch_local(const RodState& s, const RodGeometry& g, const Material& mat,
                           int edge, bool with_hessian) {
    StretchLocal out;
    const Vec3 e = s.node(edge + 1) - s.node(edge);
    const double len = e.norm();
    const double rest = g.rest_edge_len[edge];
    const double eps = len / rest - 1.0;
    const double ea = mat.ea();
    out.energy = 0.5 * ea * eps * eps * rest;

    const Vec3 t = e / len;
    const Vec3 de = ea * eps * t;  // dE/d(edge vector)
    out.grad.segment<3>(0) = -de;
    out.grad.segment<3>(3) = de;

    if (with_hessian) {
        const Mat3 ttT = t * t.transpose();
        const Mat3 hee = (ea / rest) * (ttT + (eps / (1.0 + eps)) * (Mat3::Identity() - ttT));
        out.hess.block<3, 3>(0, 0) = hee;
        out.hess.block<3, 3>(3, 3) = hee;
        out.hess.block<3, 3>(0, 3) = -hee;
        out.hess.block<3, 3>(3, 0) = -hee;
    }
    return out;
}

}  // namespace

CurvaturePair curvature(const RodState& state, int node_index) {
    return node_curvature(state, node_index);
}

CurvatureStencil curvature_stencil(const Vec3& x0, const Vec3& x1, const Vec3& x2,
                                   const Vec3& m1e, const Vec3& m2e,
                                   const Vec3& m1f, const Vec3& m2f, bool with_hessian) {
    CurvatureStencil st;
    const Vec3 ee = x1 - x0, ef = x2 - x1;
    const double norm_e = ee.norm(), norm_f = ef.norm();
    const Vec3 te = ee / norm_e, tf = ef / norm_f;
    const double chi = 1.0 + te.dot(tf);
    if (chi < 1e-6) throw AntiparallelEdgeError("antiparallel tangents in curvature stencil");

    const Vec3 kb = 2.0 * te.cross(tf) / chi;
    const double k1 = 0.5 * kb.dot(m2e + m2f);
    const double k2 = -0.5 * kb.dot(m1e + m1f);
    st.kappa = Vec2(k1, k2);

    const Vec3 tilde_t = (te + tf) / chi;
    const Vec3 tilde_d1 = (m1e + m1f) / chi;
    const Vec3 tilde_d2 = (m2e + m2f) / chi;

    const Vec3 dk1_de = (-k1 * tilde_t + tf.cross(tilde_d2)) / norm_e;
    const Vec3 dk1_df = (-k1 * tilde_t - te.cross(tilde_d2)) / norm_f;
    const Vec3 dk2_de = (-k2 * tilde_t - tf.cross(tilde_d1)) / norm_e;
    const Vec3 dk2_df = (-k2 * tilde_t + te.cross(tilde_d1)) / norm_f;

    st.grad_kappa1.setZero();
    st.grad_kappa2.setZero();
    scatter_edge_grad(st.grad_kappa1, dk1_de, dk1_df);
    scatter_edge_grad(st.grad_kappa2, dk2_de, dk2_df);
    st.grad_kappa1[3] = -0.5 * kb.dot(m1e);
    st.grad_kappa1[7] = -0.5 * kb.dot(m1f);
    st.grad_kappa2[3] = -0.5 * kb.dot(m2e);
    st.grad_kappa2[7] = -0.5 * kb.dot(m2f);

    st.hess_kappa1.setZero();
    st.hess_kappa2.setZero();
    if (!with_hessian) return st;

    const double n2e = norm_e * norm_e, n2f = norm_f * norm_f, nef = norm_e * norm_f;
    const Mat3 id = Mat3::Identity();
    const Mat3 tt_o_tt = tilde_t * tilde_t.transpose();
    const Mat3 te_o_te = te * te.transpose();
    const Mat3 tf_o_tf = tf * tf.transpose();
    const Mat3 te_o_tf = te * tf.transpose();

    {  // kappa1 position blocks
        const Vec3 tf_c_d2 = tf.cross(tilde_d2);
        const Vec3 te_c_d2 = te.cross(tilde_d2);
        const Mat3 tf_c_d2_o_tt = tf_c_d2 * tilde_t.transpose();
        const Mat3 te_c_d2_o_tt = te_c_d2 * tilde_t.transpose();
        const Mat3 kb_o_d2e = kb * m2e.transpose();
        const Mat3 kb_o_d2f = kb * m2f.transpose();

        const Mat3 de2 = (2.0 * k1 * tt_o_tt - tf_c_d2_o_tt - tf_c_d2_o_tt.transpose()) / n2e -
                         k1 / (chi * n2e) * (id - te_o_te) +
                         (kb_o_d2e + kb_o_d2e.transpose()) / (4.0 * n2e);
        const Mat3 df2 = (2.0 * k1 * tt_o_tt + te_c_d2_o_tt + te_c_d2_o_tt.transpose()) / n2f -
                         k1 / (chi * n2f) * (id - tf_o_tf) +
                         (kb_o_d2f + kb_o_d2f.transpose()) / (4.0 * n2f);
        const Mat3 dedf = -k1 / (chi * nef) * (id + te_o_tf) +
                          (2.0 * k1 * tt_o_tt - tf_c_d2_o_tt + te_c_d2_o_tt.transpose() -
                           cross_matrix(tilde_d2)) /
                              nef;
        scatter_position_blocks(st.hess_kappa1, de2, df2, dedf);
    }
    {  // kappa2 position blocks
        const Vec3 tf_c_d1 = tf.cross(tilde_d1);
        const Vec3 te_c_d1 = te.cross(tilde_d1);
        const Mat3 tf_c_d1_o_tt = tf_c_d1 * tilde_t.transpose();
        const Mat3 te_c_d1_o_tt = te_c_d1 * tilde_t.transpose();
        const Mat3 kb_o_d1e = kb * m1e.transpose();
        const Mat3 kb_o_d1f = kb * m1f.transpose();

        const Mat3 de2 = (2.0 * k2 * tt_o_tt + tf_c_d1_o_tt + tf_c_d1_o_tt.transpose()) / n2e -
                         k2 / (chi * n2e) * (id - te_o_te) -
                         (kb_o_d1e + kb_o_d1e.transpose()) / (4.0 * n2e);
        const Mat3 df2 = (2.0 * k2 * tt_o_tt - te_c_d1_o_tt - te_c_d1_o_tt.transpose()) / n2f -
                         k2 / (chi * n2f) * (id - tf_o_tf) -
                         (kb_o_d1f + kb_o_d1f.transpose()) / (4.0 * n2f);
        const Mat3 dedf = -k2 / (chi * nef) * (id + te_o_tf) +
                          (2.0 * k2 * tt_o_tt + tf_c_d1_o_tt - te_c_d1_o_tt.transpose() +
                           cross_matrix(tilde_d1)) /
                              nef;
        scatter_position_blocks(st.hess_kappa2, de2, df2, dedf);
    }

    // theta-theta diagonal
    st.hess_kappa1(3, 3) = -0.5 * kb.dot(m2e);
    st.hess_kappa1(7, 7) = -0.5 * kb.dot(m2f);
    st.hess_kappa2(3, 3) = 0.5 * kb.dot(m1e);
    st.hess_kappa2(7, 7) = 0.5 * kb.dot(m1f);

    // position-theta crosses
    const Vec3 k1_de_the = (0.5 * kb.dot(m1e) * tilde_t - tf.cross(m1e) / chi) / norm_e;
    const Vec3 k1_df_the = (0.5 * kb.dot(m1e) * tilde_t + te.cross(m1e) / chi) / norm_f;
    const Vec3 k1_de_thf = (0.5 * kb.dot(m1f) * tilde_t - tf.cross(m1f) / chi) / norm_e;
    const Vec3 k1_df_thf = (0.5 * kb.dot(m1f) * tilde_t + te.cross(m1f) / chi) / norm_f;
    scatter_theta_cross(st.hess_kappa1, 3, k1_de_the, k1_df_the);
    scatter_theta_cross(st.hess_kappa1, 7, k1_de_thf, k1_df_thf);

    const Vec3 k2_de_the = (0.5 * kb.dot(m2e) * tilde_t - tf.cross(m2e) / chi) / norm_e;
    const Vec3 k2_df_the = (0.5 * kb.dot(m2e) * tilde_t + te.cross(m2e) / chi) / norm_f;
    const Vec3 k2_de_thf = (0.5 * kb.dot(m2f) * tilde_t - tf.cross(m2f) / chi) / norm_e;
    const Vec3 k2_df_thf = (0.5 * kb.dot(m2f) * tilde_t + te.cross(m2f) / chi) / norm_f;
    scatter_theta_cross(st.hess_kappa2, 3, k2_de_the, k2_df_the);
    scatter_theta_cross(st.hess_kappa2, 7, k2_de_thf, k2_df_thf);

    return st;
}

TwistStencil twist_stencil(const Vec3& x0, const Vec3& x1, const Vec3& x2,
                           double theta_e, double theta_f, double ref_twist,
                           bool with_hessian) {
    TwistStencil st;
    const Vec3 ee = x1 - x0, ef = x2 - x1;
    const double norm_e = ee.norm(), norm_f = ef.norm();
    const Vec3 te = ee / norm_e, tf = ef / norm_f;
    const double chi = 1.0 + te.dot(tf);
    if (chi < 1e-6) throw AntiparallelEdgeError("antiparallel tangents in twist stencil");
    const Vec3 kb = 2.0 * te.cross(tf) / chi;

    st.tau = theta_f - theta_e + ref_twist;

    st.grad_tau.setZero();
    const Vec3 dtau_de = kb / (2.0 * norm_e);
    const Vec3 dtau_df = kb / (2.0 * norm_f);
    scatter_edge_grad(st.grad_tau, dtau_de, dtau_df);
    st.grad_tau[3] = -1.0;
    st.grad_tau[7] = 1.0;

    st.hess_tau.setZero();
    if (!with_hessian) return st;

    const Vec3 tilde_t = (te + tf) / chi;
    const Vec3 be = te + tilde_t, bf = tf + tilde_t;
    const Mat3 de2 =
        -(kb * be.transpose() + be * kb.transpose()) / (4.0 * norm_e * norm_e);
    const Mat3 df2 =
        -(kb * bf.transpose() + bf * kb.transpose()) / (4.0 * norm_f * norm_f);
    const Mat3 dedf = (2.0 / chi * cross_matrix(te) - kb * tilde_t.transpose()) /
                      (2.0 * norm_e * norm_f);
    scatter_position_blocks(st.hess_tau, de2, df2, dedf);
    return st;
}

ElasticTerms& ElasticTerms::operator+=(const ElasticTerms& other) {
    energy += other.energy;
    gradient += other.gradient;
    if (has_hessian && other.has_hessian) hessian += other.hessian;
    return *this;
}

ElasticTerms stretch_terms(const RodState& s, const RodGeometry& g, const Material& mat,
                           const TermOptions& opts) {
    ElasticTerms out(g.dof_count(), opts.with_hessian);
    const int ne = g.edge_count();
    // Locals are computed per edge (optionally across threads), then scattered
    // serially in edge order so both exec modes are bitwise identical.
    std::vector<StretchLocal> locals(ne);
    const bool par = (opts.mode == ExecMode::parallel) && ne >= kParallelThreshold;
    if (par) {
#pragma omp parallel for schedule(static)
        for (int k = 0; k < ne; ++k) locals[k] = stretch_local(s, g, mat, k, opts.with_hessian);
    } else {
        for (int k = 0; k < ne; ++k) locals[k] = stretch_local(s, g, mat, k, opts.with_hessian);
    }
    for (int k = 0; k < ne; ++k) {
        const StretchLocal& loc = locals[k];
        out.energy += loc.energy;
        const int map[6] = {4 * k,       4 * k + 1,       4 * k + 2,
                            4 * (k + 1), 4 * (k + 1) + 1, 4 * (k + 1) + 2};
        for (int a = 0; a < 6; ++a) out.gradient[map[a]] += loc.grad[a];
        if (opts.with_hessian) {
            for (int a = 0; a < 6; ++a)
                for (int b = 0; b < 6; ++b)
                    if (map[b] >= map[a]) out.hessian.add_upper(map[a], map[b], loc.hess(a, b));
        }
    }
    return out;
}

namespace {

template <typename LocalFn>
ElasticTerms assemble_stencils(const RodGeometry& g, const TermOptions& opts, LocalFn make_local) {
    ElasticTerms out(g.dof_count(), opts.with_hessian);
    const int ni = g.interior_count();
    const auto active = [&](int k) {
        return g.stencil_disabled.empty() || !g.stencil_disabled[k];
    };
    std::vector<StencilLocal> locals(ni);
    std::vector<std::exception_ptr> errors(ni);
    const bool par = (opts.mode == ExecMode::parallel) && ni >= kParallelThreshold;
    if (par) {
#pragma omp parallel for schedule(static)
        for (int k = 0; k < ni; ++k) {
            try {
                if (active(k)) locals[k] = make_local(k + 1);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
        for (int k = 0; k < ni; ++k)
            if (errors[k]) std::rethrow_exception(errors[k]);
    } else {
        for (int k = 0; k < ni; ++k)
            if (active(k)) locals[k] = make_local(k + 1);
    }
    for (int k = 0; k < ni; ++k) {
        const StencilLocal& loc = locals[k];
        out.energy += loc.energy;
        const int base = 4 * k;  // stencil of interior node k+1 starts at DOF 4k
        out.gradient.segment<11>(base) += loc.grad;
        if (opts.with_hessian) {
            for (int a = 0; a < 11; ++a)
                for (int b = a; b < 11; ++b)
                    out.hessian.add_upper(base + a, base + b,
                                          0.5 * (loc.hess(a, b) + loc.hess(b, a)));
        }
    }
    return out;
}

}  // namespace

ElasticTerms bend_terms(const RodState& s, const RodGeometry& g, const Material& mat,
                        const TermOptions& opts) {
    const double ei = mat.ei();
    return assemble_stencils(g, opts, [&](int i) {
        StencilLocal loc;
        const CurvatureStencil st =
            curvature_stencil(s.node(i - 1), s.node(i), s.node(i + 1), s.m1[i - 1], s.m2[i - 1],
                              s.m1[i], s.m2[i], opts.with_hessian);
        const double v = g.voronoi_len[i - 1];
        const Vec2 dk = st.kappa - g.natural_curvature[i - 1];
        const double w = ei / v;
        loc.energy = 0.5 * w * dk.squaredNorm();
        loc.grad = w * (dk[0] * st.grad_kappa1 + dk[1] * st.grad_kappa2);
        if (opts.with_hessian) {
            loc.hess = w * (st.grad_kappa1 * st.grad_kappa1.transpose() +
                            st.grad_kappa2 * st.grad_kappa2.transpose() +
                            dk[0] * st.hess_kappa1 + dk[1] * st.hess_kappa2);
        }
        return loc;
    });
}

ElasticTerms twist_terms(const RodState& s, const RodGeometry& g, const Material& mat,
                         const TermOptions& opts) {
    const double gj = mat.gj();
    return assemble_stencils(g, opts, [&](int i) {
        StencilLocal loc;
        const TwistStencil st =
            twist_stencil(s.node(i - 1), s.node(i), s.node(i + 1), s.theta(i - 1), s.theta(i),
                          s.ref_twist[i - 1], opts.with_hessian);
        const double v = g.voronoi_len[i - 1];
        const double dtau = st.tau - g.natural_twist[i - 1];
        const double w = gj / v;
        loc.energy = 0.5 * w * dtau * dtau;
        loc.grad = w * dtau * st.grad_tau;
        if (opts.with_hessian)
            loc.hess = w * (st.grad_tau * st.grad_tau.transpose() + dtau * st.hess_tau);
        return loc;
    });
}

ElasticTerms elastic_total(const RodState& s, const RodGeometry& g, const Material& mat,
                           const TermOptions& opts) {
    ElasticTerms out = stretch_terms(s, g, mat, opts);
    out += bend_terms(s, g, mat, opts);
    out += twist_terms(s, g, mat, opts);
    return out;
}

}  // namespace rodsim
