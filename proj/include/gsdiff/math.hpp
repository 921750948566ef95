// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>

#include "gsdiff/error.hpp"

namespace gsdiff {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kEncodingDim = 16;
using Encoding = Eigen::Matrix<double, kEncodingDim, 1>;

/// Rotation quaternion stored scalar-first (w, x, y, z).
struct Quat {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static Quat identity() { return {}; }

    static Quat from_axis_angle(const Vec3& axis, double angle) {
        const Vec3 a = axis.normalized();
        const double s = std::sin(0.5 * angle);
        return {std::cos(0.5 * angle), a.x() * s, a.y() * s, a.z() * s};
    }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }

    Quat operator-() const { return {-w, -x, -y, -z}; }

    Quat normalized() const {
        const double n = norm();
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw ValidationError("cannot normalize a zero-norm quaternion");
        }
        return {w / n, x / n, y / n, z / n};
    }

    /// Hamilton product, `(*this) * o`.
    Quat operator*(const Quat& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }

    bool operator==(const Quat&) const = default;

    /// Rotation matrix of the (assumed unit) quaternion.
    Mat3 matrix() const {
        Mat3 r;
        r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
            2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
            2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
        return r;
    }

    /// Rotation angle in [0, pi].
    double angle() const {
        const Quat q = normalized();
        const double v = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
        return 2.0 * std::atan2(v, std::abs(q.w));
    }
};

/// Quaternion of a proper rotation matrix (Shepperd's method).
inline Quat quat_from_matrix(const Mat3& m) {
    Quat q;
    const double tr = m.trace();
    if (tr > 0) {
        const double s = 2.0 * std::sqrt(tr + 1.0);
        q = {0.25 * s, (m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s, (m(1, 0) - m(0, 1)) / s};
    } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
        q = {(m(2, 1) - m(1, 2)) / s, 0.25 * s, (m(0, 1) + m(1, 0)) / s, (m(0, 2) + m(2, 0)) / s};
    } else if (m(1, 1) > m(2, 2)) {
        const double s = 2.0 * std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2));
        q = {(m(0, 2) - m(2, 0)) / s, (m(0, 1) + m(1, 0)) / s, 0.25 * s, (m(1, 2) + m(2, 1)) / s};
    } else {
        const double s = 2.0 * std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1));
        q = {(m(1, 0) - m(0, 1)) / s, (m(0, 2) + m(2, 0)) / s, (m(1, 2) + m(2, 1)) / s, 0.25 * s};
    }
    return q.normalized();
}

} // namespace gsdiff
