#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <stdexcept>
#include <string>

namespace rodsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;
using MatX = Eigen::MatrixXd;

// Thrown when consecutive rod nodes coincide (zero-length edge).
struct DegenerateEdgeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when two adjacent tangents are (numerically) antiparallel; the
// discrete curvature is singular there and the kink cannot be resolved.
struct AntiparallelEdgeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when rods are joined at non-coincident nodes.
struct JointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when the linear system inside a Newton solve cannot be factorized,
// or when adaptive stepping fails at the minimum step size.
struct SolveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Mat3 cross_matrix(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

// Signed angle from a to b measured about axis, in (-pi, pi].
inline double signed_angle(const Vec3& a, const Vec3& b, const Vec3& axis) {
    return std::atan2(a.cross(b).dot(axis), a.dot(b));
}

// Rotate v about unit axis by angle (Rodrigues).
inline Vec3 rotate_about_axis(const Vec3& v, const Vec3& axis, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return v * c + axis.cross(v) * s + axis * (axis.dot(v)) * (1.0 - c);
}

}  // namespace rodsim
