#pragma once

#include "pags/common.hpp"

#include <array>

namespace pags::quat {

inline Quat normalized(const Quat& q) { return q / q.norm(); }

/// Hamilton product a ⊗ b.
inline Quat multiply(const Quat& a, const Quat& b) {
    return Quat(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
                a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
                a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
                a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

/// Matrix L(a) with a ⊗ b = L(a) b.
inline Eigen::Matrix4d left_matrix(const Quat& a) {
    Eigen::Matrix4d m;
    m << a[0], -a[1], -a[2], -a[3],
         a[1],  a[0], -a[3],  a[2],
         a[2],  a[3],  a[0], -a[1],
         a[3], -a[2],  a[1],  a[0];
    return m;
}

/// Matrix R(b) with a ⊗ b = R(b) a.
inline Eigen::Matrix4d right_matrix(const Quat& b) {
    Eigen::Matrix4d m;
    m << b[0], -b[1], -b[2], -b[3],
         b[1],  b[0],  b[3], -b[2],
         b[2], -b[3],  b[0],  b[1],
         b[3],  b[2], -b[1],  b[0];
    return m;
}

inline Quat conjugate(const Quat& q) { return Quat(q[0], -q[1], -q[2], -q[3]); }

/// Rotation matrix of q / |q|.
inline Mat3 to_matrix(const Quat& q_raw) {
    const Quat q = normalized(q_raw);
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

/// Back-propagates dL/dR (R = to_matrix(q_raw)) to dL/dq_raw, including the
/// normalization of q_raw.
inline Quat matrix_grad_to_quat(const Quat& q_raw, const Mat3& dR) {
    const double n = q_raw.norm();
    const Quat q = q_raw / n;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Quat g;
    // dR/dw
    g[0] = 2 * (-z * dR(0, 1) + y * dR(0, 2) + z * dR(1, 0) - x * dR(1, 2) - y * dR(2, 0) + x * dR(2, 1));
    // dR/dx
    g[1] = 2 * (y * dR(0, 1) + z * dR(0, 2) + y * dR(1, 0) - 2 * x * dR(1, 1) - w * dR(1, 2) + z * dR(2, 0) +
                w * dR(2, 1) - 2 * x * dR(2, 2));
    // dR/dy
    g[2] = 2 * (-2 * y * dR(0, 0) + x * dR(0, 1) + w * dR(0, 2) + x * dR(1, 0) + z * dR(1, 2) - w * dR(2, 0) +
                z * dR(2, 1) - 2 * y * dR(2, 2));
    // dR/dz
    g[3] = 2 * (-2 * z * dR(0, 0) - w * dR(0, 1) + x * dR(0, 2) + w * dR(1, 0) - 2 * z * dR(1, 1) + y * dR(1, 2) +
                x * dR(2, 0) + y * dR(2, 1));
    // through q = q_raw / |q_raw|
    return (g - q * q.dot(g)) / n;
}

/// Rotation of angle `radians` about unit `axis`.
inline Quat from_axis_angle(const Vec3& axis, double radians) {
    const Vec3 a = axis.normalized();
    const double s = std::sin(0.5 * radians);
    return Quat(std::cos(0.5 * radians), a.x() * s, a.y() * s, a.z() * s);
}

/// Shortest-path spherical interpolation between unit quaternions.
inline Quat slerp(const Quat& a, const Quat& b_in, double t) {
    Quat b = b_in;
    double d = a.dot(b);
    if (d < 0.0) {
        b = -b;
        d = -d;
    }
    if (d > 0.9995) return normalized(a + t * (b - a));
    const double theta = std::acos(d);
    const double s = std::sin(theta);
    return (std::sin((1.0 - t) * theta) / s) * a + (std::sin(t * theta) / s) * b;
}

}  // namespace pags::quat
