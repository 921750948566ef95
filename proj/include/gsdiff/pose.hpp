// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gsdiff/error.hpp"
#include "gsdiff/math.hpp"
#include "gsdiff/scene.hpp"

namespace gsdiff {

enum class PoseSource : std::uint8_t { captured, interpolated };

/// Camera-to-world extrinsics. `rotation` maps camera axes (x right, y down,
/// z forward) into the world; `translation` is the camera centre.
struct Pose {
    Quat rotation;
    Vec3 translation = Vec3::Zero();
    TimeStamp epoch = TimeStamp::before;
    PoseSource source = PoseSource::captured;
    /// Interpolation parameter within its gap; zero for captured poses.
    double delta = 0.0;

    Mat3 world_to_camera_rotation() const { return rotation.matrix().transpose(); }
    Vec3 to_camera(const Vec3& world) const { return world_to_camera_rotation() * (world - translation); }

    bool operator==(const Pose& o) const {
        return rotation == o.rotation && translation == o.translation && epoch == o.epoch &&
               source == o.source && delta == o.delta;
    }
};

struct PoseSequence {
    std::vector<Pose> poses;
    /// Unset for a merged, cross-epoch sequence.
    std::optional<TimeStamp> epoch;
    int n_interp = 0;
    /// Set when a request could not be honoured (e.g. densifying one pose).
    std::optional<std::string> warning;

    std::size_t size() const { return poses.size(); }
    const Pose& operator[](std::size_t i) const { return poses[i]; }

    std::vector<std::size_t> captured_indices() const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < poses.size(); ++i) {
            if (poses[i].source == PoseSource::captured) idx.push_back(i);
        }
        return idx;
    }
};

/// Spherical linear interpolation along the shorter arc. Falls back to
/// normalized lerp when sin(theta) < 1e-8.
inline Quat slerp(const Quat& from, const Quat& to, double delta) {
    if (!(from.norm() > 0.0) || !(to.norm() > 0.0)) throw ValidationError("slerp input has zero norm");
    if (!(delta >= 0.0 && delta <= 1.0)) throw ValidationError("slerp parameter outside [0,1]");
    if (delta == 0.0) return from;
    if (delta == 1.0) return to;
    const Quat a = from.normalized();
    Quat b = to.normalized();
    double cos_theta = a.dot(b);
    if (cos_theta < 0.0) {
        b = -b;
        cos_theta = -cos_theta;
    }
    cos_theta = std::min(cos_theta, 1.0);
    const double theta = std::acos(cos_theta);
    const double sin_theta = std::sin(theta);
    double wa = 1.0 - delta;
    double wb = delta;
    if (sin_theta >= 1e-8) {
        wa = std::sin((1.0 - delta) * theta) / sin_theta;
        wb = std::sin(delta * theta) / sin_theta;
    }
    const Quat q{wa * a.w + wb * b.w, wa * a.x + wb * b.x, wa * a.y + wb * b.y, wa * a.z + wb * b.z};
    return q.normalized();
}

inline Vec3 lerp_translation(const Vec3& from, const Vec3& to, double delta) {
    return (1.0 - delta) * from + delta * to;
}

inline Pose interpolate_pose(const Pose& a, const Pose& b, double delta) {
    Pose p;
    p.rotation = slerp(a.rotation, b.rotation, delta);
    p.translation = lerp_translation(a.translation, b.translation, delta);
    p.epoch = a.epoch;
    p.source = PoseSource::interpolated;
    p.delta = delta;
    return p;
}

/// Inserts `n` interpolants at j/(n+1), j=1..n, into every gap between
/// consecutive poses of the same epoch. Gaps that cross epochs stay empty.
inline PoseSequence densify(const PoseSequence& captured, int n) {
    if (n < 0) throw ValidationError("interpolation count must be non-negative");
    PoseSequence out;
    out.epoch = captured.epoch;
    out.n_interp = n;
    if (captured.size() < 2) {
        out.poses = captured.poses;
        out.n_interp = 0;
        if (n > 0) out.warning = "fewer than two poses; nothing to interpolate";
        return out;
    }
    out.poses.reserve(captured.size() + static_cast<std::size_t>(n) * (captured.size() - 1));
    for (std::size_t i = 0; i < captured.size(); ++i) {
        out.poses.push_back(captured[i]);
        if (i + 1 == captured.size() || captured[i].epoch != captured[i + 1].epoch) continue;
        for (int j = 1; j <= n; ++j) {
            out.poses.push_back(interpolate_pose(captured[i], captured[i + 1], static_cast<double>(j) / (n + 1)));
        }
    }
    return out;
}

/// Concatenates the before and after captures into one cross-epoch list.
inline PoseSequence merge(const PoseSequence& before, const PoseSequence& after) {
    PoseSequence merged;
    merged.poses = before.poses;
    merged.poses.insert(merged.poses.end(), after.poses.begin(), after.poses.end());
    merged.n_interp = before.n_interp;
    return merged;
}

/// Splits a merged sequence back into its per-epoch views.
inline std::pair<PoseSequence, PoseSequence> split_epochs(const PoseSequence& merged) {
    PoseSequence b, a;
    b.epoch = TimeStamp::before;
    a.epoch = TimeStamp::after;
    b.n_interp = a.n_interp = merged.n_interp;
    for (const auto& p : merged.poses) (p.epoch == TimeStamp::before ? b : a).poses.push_back(p);
    return {b, a};
}

/// Camera at `eye` looking at `target`, with world `up` pointing to image-up.
inline Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ()) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-12) right = forward.cross(Vec3::UnitX());
    right.normalize();
    const Vec3 down = forward.cross(right);
    Mat3 r;
    r.col(0) = right;
    r.col(1) = down;
    r.col(2) = forward;
    Pose p;
    p.rotation = quat_from_matrix(r);
    p.translation = eye;
    return p;
}

} // namespace gsdiff
