// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "gsdiff/error.hpp"
#include "gsdiff/frames.hpp"
#include "gsdiff/raster.hpp"
#include "gsdiff/scene.hpp"

namespace gsdiff {

/// Naive detector: a Gaussian counts as changed when any of its after-epoch
/// deformation components exceeds its threshold.
struct DeltaThresholds {
    double pos_thresh = 0.1;   // world units
    double rot_thresh = 0.1;   // radians
    double scale_thresh = 0.1; // log-scale units

    void validate() const {
        if (!(pos_thresh >= 0.0) || !(rot_thresh >= 0.0) || !(scale_thresh >= 0.0)) {
            throw ValidationError("delta thresholds must be non-negative");
        }
    }
};

inline bool exceeds(const DeformationDelta& d, const DeltaThresholds& th) {
    return d.d_position.norm() > th.pos_thresh || d.d_rotation.angle() > th.rot_thresh ||
           d.d_log_scale.norm() > th.scale_thresh;
}

inline std::vector<std::uint32_t> filter_by_delta(const GaussianCloud& cloud, const DeltaThresholds& th) {
    th.validate();
    const DeltaTable& after = cloud.delta_table(TimeStamp::after);
    std::vector<std::uint32_t> selected;
    for (std::size_t i = 0; i < after.size(); ++i) {
        if (exceeds(after[i], th)) selected.push_back(static_cast<std::uint32_t>(i));
    }
    return selected;
}

inline GaussianCloud subset(const GaussianCloud& cloud, const std::vector<std::uint32_t>& indices) {
    GaussianCloud out;
    for (TimeStamp t : kEpochs) {
        if (cloud.deltas[static_cast<std::size_t>(t)]) out.deltas[static_cast<std::size_t>(t)] = DeltaTable{};
    }
    for (std::uint32_t i : indices) {
        if (i >= cloud.size()) throw ValidationError("selection index out of range");
        out.gaussians.push_back(cloud.gaussians[i]);
        out.partition.push_back(cloud.partition[i]);
        for (TimeStamp t : kEpochs) {
            auto& d = out.deltas[static_cast<std::size_t>(t)];
            if (d) d->push_back((*cloud.deltas[static_cast<std::size_t>(t)])[i]);
        }
    }
    return out;
}

inline constexpr double kBaselineAlphaThreshold = 0.5;

/// Renders only the selected Gaussians; a pixel is changed where their
/// accumulated alpha exceeds 0.5.
inline ChangeMask render_baseline_change_map(const GaussianCloud& cloud, const std::vector<std::uint32_t>& selected,
                                             TimeStamp t, const Camera& cam, int threads = 1) {
    RenderOptions opt;
    opt.record_contributions = false;
    opt.threads = threads;
    const FrameBundle fb = render_view(subset(cloud, selected), t, cam, opt);
    ChangeMask m = ChangeMask::empty(fb.width, fb.height, 0, t);
    for (std::size_t p = 0; p < fb.pixel_count(); ++p) m.mask[p] = fb.alpha[p] > kBaselineAlphaThreshold;
    return m;
}

/// Threshold sweep: every position threshold paired with every
/// rotation/scale threshold (rotation and scale share a value).
inline std::vector<DeltaThresholds> threshold_grid(const std::vector<double>& pos, const std::vector<double>& rot_scale) {
    std::vector<DeltaThresholds> grid;
    for (double p : pos)
        for (double r : rot_scale) grid.push_back({p, r, r});
    return grid;
}

} // namespace gsdiff
