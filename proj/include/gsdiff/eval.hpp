// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "gsdiff/error.hpp"
#include "gsdiff/frames.hpp"

namespace gsdiff {

struct PixelMetrics {
    double precision = 1.0;
    double recall = 1.0;
    double f1 = 1.0;
    double iou = 1.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

/// Metrics from raw counts. Empty denominators resolve to 1 (nothing was
/// missed / nothing was wrongly claimed); F1 is 0 when P + R is 0.
inline PixelMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    PixelMetrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : (fn == 0 ? 1.0 : 0.0);
    m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
    m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.iou = tp + fp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fp + fn) : 1.0;
    return m;
}

inline PixelMetrics pixel_metrics(const ChangeMask& pred, const ChangeMask& gt) {
    require_same_size(pred, gt);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.mask.size(); ++i) {
        const bool p = pred.mask[i] != 0;
        const bool g = gt.mask[i] != 0;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
    }
    return metrics_from_counts(tp, fp, fn);
}

/// Per-view mean and pooled (summed counts) aggregates.
struct MetricsSummary {
    std::vector<PixelMetrics> per_view;
    PixelMetrics mean;
    PixelMetrics pooled;
};

inline MetricsSummary summarize(std::vector<PixelMetrics> per_view) {
    MetricsSummary s;
    s.per_view = std::move(per_view);
    if (s.per_view.empty()) return s;
    std::size_t tp = 0, fp = 0, fn = 0;
    PixelMetrics mean{0, 0, 0, 0, 0, 0, 0};
    for (const auto& m : s.per_view) {
        tp += m.tp;
        fp += m.fp;
        fn += m.fn;
        mean.precision += m.precision;
        mean.recall += m.recall;
        mean.f1 += m.f1;
        mean.iou += m.iou;
    }
    const double n = static_cast<double>(s.per_view.size());
    mean.precision /= n;
    mean.recall /= n;
    mean.f1 /= n;
    mean.iou /= n;
    mean.tp = tp;
    mean.fp = fp;
    mean.fn = fn;
    s.mean = mean;
    s.pooled = metrics_from_counts(tp, fp, fn);
    return s;
}

// --- connected components and boxes ----------------------------------------

struct PixelCoord {
    int x = 0;
    int y = 0;

    bool operator==(const PixelCoord&) const = default;
};

using Component = std::vector<PixelCoord>;

/// 8-connected components, each listed in raster order; components are
/// ordered by their first (top-left in raster order) pixel.
inline std::vector<Component> connected_components(const ChangeMask& mask) {
    const int W = mask.width;
    const int H = mask.height;
    const std::size_t n = mask.mask.size();
    std::vector<std::uint32_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    auto unite = [&](std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent[b] = a; // root stays the earliest pixel in raster order
    };
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const auto p = static_cast<std::uint32_t>(y * W + x);
            if (!mask.mask[p]) continue;
            // previously scanned neighbours: W, NW, N, NE
            const int dx[] = {-1, -1, 0, 1};
            const int dy[] = {0, -1, -1, -1};
            for (int k = 0; k < 4; ++k) {
                const int nx = x + dx[k];
                const int ny = y + dy[k];
                if (nx < 0 || ny < 0 || nx >= W) continue;
                const auto q = static_cast<std::uint32_t>(ny * W + nx);
                if (mask.mask[q]) unite(p, q);
            }
        }
    }
    std::vector<int> slot(n, -1);
    std::vector<Component> comps;
    for (std::uint32_t p = 0; p < n; ++p) {
        if (!mask.mask[p]) continue;
        const std::uint32_t r = find(p);
        if (slot[r] < 0) {
            slot[r] = static_cast<int>(comps.size());
            comps.emplace_back();
        }
        comps[static_cast<std::size_t>(slot[r])].push_back({static_cast<int>(p % W), static_cast<int>(p / W)});
    }
    return comps;
}

/// Inclusive pixel box.
struct BBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    long area() const { return static_cast<long>(x_max - x_min + 1) * (y_max - y_min + 1); }
    bool contains(const PixelCoord& p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }

    bool operator==(const BBox&) const = default;
};

inline BBox min_bounding_rect(const Component& c) {
    if (c.empty()) throw ValidationError("cannot bound an empty component");
    BBox b{c.front().x, c.front().y, c.front().x, c.front().y};
    for (const auto& p : c) {
        b.x_min = std::min(b.x_min, p.x);
        b.y_min = std::min(b.y_min, p.y);
        b.x_max = std::max(b.x_max, p.x);
        b.y_max = std::max(b.y_max, p.y);
    }
    return b;
}

inline std::vector<BBox> mask_boxes(const ChangeMask& mask) {
    std::vector<BBox> boxes;
    for (const auto& c : connected_components(mask)) boxes.push_back(min_bounding_rect(c));
    return boxes;
}

inline double box_iou(const BBox& a, const BBox& b) {
    const int ix0 = std::max(a.x_min, b.x_min);
    const int iy0 = std::max(a.y_min, b.y_min);
    const int ix1 = std::min(a.x_max, b.x_max);
    const int iy1 = std::min(a.y_max, b.y_max);
    const long inter = (ix1 >= ix0 && iy1 >= iy0) ? static_cast<long>(ix1 - ix0 + 1) * (iy1 - iy0 + 1) : 0;
    return static_cast<double>(inter) / static_cast<double>(a.area() + b.area() - inter);
}

struct BoxMatch {
    std::size_t pred = 0;
    std::size_t gt = 0;
    double iou = 0.0;
};

struct MatchReport {
    std::vector<BoxMatch> matches;
    std::vector<std::size_t> misses;       // unmatched ground-truth boxes
    std::vector<std::size_t> false_alarms; // unmatched predictions
};

/// Greedy matching, highest IoU first; each box is used at most once.
inline MatchReport match_boxes(const std::vector<BBox>& preds, const std::vector<BBox>& gts, double iou_thresh = 0.5) {
    std::vector<BoxMatch> cand;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        for (std::size_t j = 0; j < gts.size(); ++j) {
            const double v = box_iou(preds[i], gts[j]);
            if (v >= iou_thresh) cand.push_back({i, j, v});
        }
    }
    std::stable_sort(cand.begin(), cand.end(), [](const BoxMatch& a, const BoxMatch& b) { return a.iou > b.iou; });
    std::vector<bool> pred_used(preds.size(), false), gt_used(gts.size(), false);
    MatchReport r;
    for (const auto& c : cand) {
        if (pred_used[c.pred] || gt_used[c.gt]) continue;
        pred_used[c.pred] = gt_used[c.gt] = true;
        r.matches.push_back(c);
    }
    for (std::size_t j = 0; j < gts.size(); ++j)
        if (!gt_used[j]) r.misses.push_back(j);
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (!pred_used[i]) r.false_alarms.push_back(i);
    return r;
}

} // namespace gsdiff
