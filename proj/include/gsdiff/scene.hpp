// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gsdiff/error.hpp"
#include "gsdiff/math.hpp"

namespace gsdiff {

using InstanceId = std::uint32_t;

/// The two capture epochs of a scene.
enum class TimeStamp : std::uint8_t { before = 0, after = 1 };

inline constexpr std::array<TimeStamp, 2> kEpochs{TimeStamp::before, TimeStamp::after};

inline const char* to_string(TimeStamp t) { return t == TimeStamp::before ? "before" : "after"; }

inline TimeStamp parse_timestamp(std::string_view s) {
    if (s == "before") return TimeStamp::before;
    if (s == "after") return TimeStamp::after;
    throw ValidationError("unknown epoch '" + std::string(s) + "' (expected before|after)");
}

enum class PartitionLabel : std::uint8_t { unassigned = 0, unchanged = 1, changed = 2 };

/// One splat primitive. Color and classification encoding are view independent.
struct Gaussian {
    Vec3 position = Vec3::Zero();
    Vec3 scale = Vec3::Ones();
    Quat rotation;
    double opacity = 1.0;
    Vec3 color = Vec3::Zero();
    InstanceId instance_id = 0; // ground truth, synthetic scenes only
    Encoding encoding = Encoding::Zero();

    bool operator==(const Gaussian& o) const {
        return position == o.position && scale == o.scale && rotation == o.rotation &&
               opacity == o.opacity && color == o.color && instance_id == o.instance_id &&
               encoding == o.encoding;
    }
};

/// Per-Gaussian offset at one epoch. Rotation is applied multiplicatively after
/// normalization; scale is additive in log space.
struct DeformationDelta {
    Vec3 d_position = Vec3::Zero();
    Quat d_rotation;
    Vec3 d_log_scale = Vec3::Zero();

    bool is_zero() const {
        return d_position.isZero(0.0) && d_rotation == Quat::identity() && d_log_scale.isZero(0.0);
    }

    bool operator==(const DeformationDelta& o) const {
        return d_position == o.d_position && d_rotation == o.d_rotation && d_log_scale == o.d_log_scale;
    }
};

using DeltaTable = std::vector<DeformationDelta>;

/// The deformable scene: a canonical Gaussian set plus one delta table per epoch.
struct GaussianCloud {
    std::vector<Gaussian> gaussians;
    std::array<std::optional<DeltaTable>, 2> deltas;
    std::vector<PartitionLabel> partition;

    std::size_t size() const { return gaussians.size(); }

    /// Empty cloud with zero deltas at both epochs.
    static GaussianCloud with_gaussians(std::vector<Gaussian> gs) {
        GaussianCloud c;
        const std::size_t n = gs.size();
        c.gaussians = std::move(gs);
        c.deltas[0] = DeltaTable(n);
        c.deltas[1] = DeltaTable(n);
        c.partition.assign(n, PartitionLabel::unassigned);
        return c;
    }

    const DeltaTable& delta_table(TimeStamp t) const {
        const auto& d = deltas[static_cast<std::size_t>(t)];
        if (!d) {
            throw ConfigError(std::string("cloud has no delta table for epoch '") + to_string(t) + "'");
        }
        return *d;
    }

    DeltaTable& delta_table(TimeStamp t) {
        auto& d = deltas[static_cast<std::size_t>(t)];
        if (!d) d = DeltaTable(gaussians.size());
        return *d;
    }

    bool operator==(const GaussianCloud&) const = default;
};

inline void validate(const Gaussian& g, std::size_t index) {
    const std::string where = "gaussian " + std::to_string(index) + ": ";
    if (std::abs(g.rotation.norm() - 1.0) > 1e-9) throw ValidationError(where + "rotation is not unit norm");
    if (!(g.scale.array() > 0.0).all()) throw ValidationError(where + "scale must be strictly positive");
    if (!(g.opacity >= 0.0 && g.opacity <= 1.0)) throw ValidationError(where + "opacity outside [0,1]");
    if (!((g.color.array() >= 0.0).all() && (g.color.array() <= 1.0).all())) {
        throw ValidationError(where + "color outside [0,1]");
    }
    if (!g.encoding.allFinite()) throw ValidationError(where + "encoding is not finite");
}

inline void validate(const GaussianCloud& cloud) {
    for (std::size_t i = 0; i < cloud.size(); ++i) validate(cloud.gaussians[i], i);
    for (TimeStamp t : kEpochs) {
        const auto& d = cloud.deltas[static_cast<std::size_t>(t)];
        if (d && d->size() != cloud.size()) {
            throw ValidationError(std::string("delta table for '") + to_string(t) + "' has " +
                                  std::to_string(d->size()) + " rows, expected " + std::to_string(cloud.size()));
        }
    }
    if (cloud.partition.size() != cloud.size()) {
        throw ValidationError("partition label count does not match gaussian count");
    }
}

inline Gaussian apply_delta(const Gaussian& g, const DeformationDelta& d) {
    if (d.is_zero()) return g;
    Gaussian out = g;
    out.position = g.position + d.d_position;
    out.rotation = (d.d_rotation.normalized() * g.rotation).normalized();
    out.scale = (g.scale.array() * d.d_log_scale.array().exp()).matrix();
    return out;
}

/// Canonical Gaussians moved to epoch `t`. Everything except geometry is carried over.
inline GaussianCloud deform(const GaussianCloud& cloud, TimeStamp t) {
    const DeltaTable& table = cloud.delta_table(t);
    if (table.size() != cloud.size()) throw ValidationError("delta table length does not match cloud size");
    GaussianCloud out = cloud;
    for (std::size_t i = 0; i < cloud.size(); ++i) out.gaussians[i] = apply_delta(cloud.gaussians[i], table[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

enum class ChangeKind { disappear, appear, translate };

struct ChangeSpec {
    InstanceId instance = 1;
    ChangeKind kind = ChangeKind::disappear;
    Vec3 offset = Vec3(0.6, 0.0, 0.0); // only used by `translate`
};

struct SceneSpec {
    int n_instances = 4;
    int gaussians_per_instance = 20;
    int background_grid = 8; // background_grid^2 floor blobs
    double floor_extent = 2.0;
    double floor_disc_scale = 0.55; // fraction of a grid cell
    double instance_ring_radius = 1.0;
    double instance_radius = 0.36;
    double blob_scale = 0.18;
    double instance_lift = 0.3; // height of the lowest blob centre above the floor
    std::vector<ChangeSpec> changes{ChangeSpec{}};
    /// Adds one elongated Gaussian owned by the first changed instance that also
    /// lies underneath its nearest unchanged neighbour.
    bool shared_gaussian = false;
    /// Std-dev of small deltas given to every Gaussian at the after epoch.
    double delta_noise = 0.0;
    /// Floor discs within this distance of a changed instance spin about their
    /// normal at the after epoch. The discs are round, so renders are unchanged.
    double hidden_spin_radius = 0.0;
};

struct SyntheticScene {
    GaussianCloud cloud;
    std::set<InstanceId> changed_ids;
    /// Index of the adversarial shared Gaussian, when requested.
    std::optional<std::size_t> shared_index;
};

/// Offset that carries a Gaussian far beyond any camera's far plane.
inline Vec3 vanish_offset() { return Vec3(0.0, 0.0, -500.0); }

inline Vec3 instance_center(const SceneSpec& spec, int k) {
    const double a = 2.0 * std::numbers::pi * (k + 0.125) / spec.n_instances;
    return Vec3(spec.instance_ring_radius * std::cos(a), spec.instance_ring_radius * std::sin(a), 0.0);
}

inline SyntheticScene generate_synthetic_scene(const SceneSpec& spec, std::uint64_t seed) {
    if (spec.n_instances < 1) throw ValidationError("scene needs at least one instance");
    if (spec.gaussians_per_instance < 1) throw ValidationError("scene needs at least one gaussian per instance");
    if (spec.background_grid < 1) throw ValidationError("scene needs at least one background blob");
    if (!(spec.floor_extent > 0.0) || !(spec.instance_radius > 0.0)) {
        throw ValidationError("scene extents must be positive");
    }
    for (const auto& c : spec.changes) {
        if (c.instance < 1 || c.instance > static_cast<InstanceId>(spec.n_instances)) {
            throw ValidationError("change refers to unknown instance " + std::to_string(c.instance));
        }
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<Gaussian> gs;

    // Floor: a grid of flat, nearly opaque discs with a mild checker tint.
    const int g = spec.background_grid;
    const double cell = 2.0 * spec.floor_extent / g;
    for (int iy = 0; iy < g; ++iy) {
        for (int ix = 0; ix < g; ++ix) {
            Gaussian b;
            b.position = Vec3(-spec.floor_extent + (ix + 0.5) * cell, -spec.floor_extent + (iy + 0.5) * cell, 0.0);
            b.scale = Vec3(spec.floor_disc_scale * cell, spec.floor_disc_scale * cell, 0.01);
            b.rotation = Quat::from_axis_angle(Vec3::UnitZ(), 0.3 * (unit(rng) - 0.5));
            b.opacity = 0.99;
            const double shade = ((ix + iy) % 2 == 0 ? 0.55 : 0.45) + 0.05 * (unit(rng) - 0.5);
            b.color = Vec3(shade, shade, shade * 0.95);
            b.instance_id = 0;
            gs.push_back(b);
        }
    }

    // Instances: compact clusters resting on the floor.
    static const std::array<Vec3, 6> palette{Vec3(0.85, 0.20, 0.15), Vec3(0.15, 0.55, 0.85),
                                             Vec3(0.20, 0.75, 0.25), Vec3(0.90, 0.75, 0.15),
                                             Vec3(0.65, 0.30, 0.80), Vec3(0.95, 0.50, 0.65)};
    for (int k = 0; k < spec.n_instances; ++k) {
        const Vec3 center = instance_center(spec, k);
        const Vec3 base = palette[static_cast<std::size_t>(k) % palette.size()];
        for (int j = 0; j < spec.gaussians_per_instance; ++j) {
            Gaussian p;
            const double r = spec.instance_radius * std::sqrt(unit(rng));
            const double phi = 2.0 * std::numbers::pi * unit(rng);
            p.position = center + Vec3(r * std::cos(phi), r * std::sin(phi), spec.instance_lift + 0.30 * unit(rng));
            p.scale = spec.blob_scale * Vec3(0.8 + 0.4 * unit(rng), 0.8 + 0.4 * unit(rng), 0.8 + 0.4 * unit(rng));
            p.rotation = Quat{normal(rng), normal(rng), normal(rng), normal(rng)}.normalized();
            p.opacity = 0.92 + 0.06 * unit(rng);
            p.color = (base + 0.06 * Vec3(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5))
                          .cwiseMax(0.0)
                          .cwiseMin(1.0);
            p.instance_id = static_cast<InstanceId>(k + 1);
            gs.push_back(p);
        }
    }

    SyntheticScene out;
    std::optional<InstanceId> shared_owner;
    if (spec.shared_gaussian) {
        if (spec.changes.empty() || spec.n_instances < 2) {
            throw ValidationError("shared-gaussian scene needs a changed and an unchanged instance");
        }
        shared_owner = spec.changes.front().instance;
        std::set<InstanceId> changed;
        for (const auto& c : spec.changes) changed.insert(c.instance);
        // nearest unchanged instance
        const Vec3 a = instance_center(spec, static_cast<int>(*shared_owner) - 1);
        int best = -1;
        double best_d = 0.0;
        for (int k = 0; k < spec.n_instances; ++k) {
            if (changed.count(static_cast<InstanceId>(k + 1))) continue;
            const double d = (instance_center(spec, k) - a).norm();
            if (best < 0 || d < best_d) {
                best = k;
                best_d = d;
            }
        }
        if (best < 0) throw ValidationError("shared-gaussian scene needs an unchanged instance");
        const Vec3 b = instance_center(spec, best);
        // Spans from the middle of the changed instance to past the far side of the
        // unchanged one, lying flat just above the floor.
        const Vec3 axis = (b - a).normalized();
        const Vec3 start = a;
        const Vec3 end = b + axis * spec.instance_radius;
        Gaussian s;
        s.position = 0.5 * (start + end) + Vec3(0, 0, 0.03);
        const double half_len = 0.5 * (end - start).norm();
        s.scale = Vec3(0.5 * half_len, 0.6 * spec.instance_radius, 0.015);
        s.rotation = Quat::from_axis_angle(Vec3::UnitZ(), std::atan2(axis.y(), axis.x()));
        s.opacity = 0.97;
        s.color = palette[static_cast<std::size_t>(*shared_owner - 1) % palette.size()] * 0.8;
        s.instance_id = *shared_owner;
        out.shared_index = gs.size();
        gs.push_back(s);
    }

    out.cloud = GaussianCloud::with_gaussians(std::move(gs));
    DeltaTable& before = out.cloud.delta_table(TimeStamp::before);
    DeltaTable& after = out.cloud.delta_table(TimeStamp::after);

    if (spec.delta_noise > 0.0) {
        for (auto& d : after) {
            d.d_position = spec.delta_noise * Vec3(normal(rng), normal(rng), normal(rng));
            d.d_rotation =
                Quat::from_axis_angle(Vec3(normal(rng), normal(rng), normal(rng)), spec.delta_noise * normal(rng));
            d.d_log_scale = spec.delta_noise * Vec3(normal(rng), normal(rng), normal(rng));
        }
    }

    if (spec.hidden_spin_radius > 0.0) {
        for (std::size_t i = 0; i < out.cloud.size(); ++i) {
            const Gaussian& gi = out.cloud.gaussians[i];
            if (gi.instance_id != 0) continue;
            for (const auto& c : spec.changes) {
                const Vec3 d = gi.position - instance_center(spec, static_cast<int>(c.instance) - 1);
                if (d.head<2>().norm() > spec.hidden_spin_radius) continue;
                const double angle = 0.3 + 1.3 * unit(rng);
                after[i].d_rotation = Quat::from_axis_angle(Vec3::UnitZ(), angle) * after[i].d_rotation;
                break;
            }
        }
    }

    for (const auto& c : spec.changes) {
        out.changed_ids.insert(c.instance);
        for (std::size_t i = 0; i < out.cloud.size(); ++i) {
            if (out.cloud.gaussians[i].instance_id != c.instance) continue;
            switch (c.kind) {
            case ChangeKind::disappear: after[i].d_position += vanish_offset(); break;
            case ChangeKind::appear: before[i].d_position += vanish_offset(); break;
            case ChangeKind::translate: after[i].d_position += c.offset; break;
            }
        }
    }
    return out;
}

} // namespace gsdiff
