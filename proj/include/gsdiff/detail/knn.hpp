// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

#include "gsdiff/math.hpp"

namespace gsdiff::detail {

/// Static k-d tree over 3D points. Neighbours are ordered by (squared
/// distance, index), so equidistant points resolve to the lower index.
class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), 0u);
        if (!points_.empty()) root_ = build(0, order_.size());
    }

    /// The k nearest points to point `self`, excluding itself.
    std::vector<std::uint32_t> nearest_excluding(std::uint32_t self, int k) const {
        Heap heap;
        search(root_, points_[self], self, static_cast<std::size_t>(k), heap);
        std::vector<std::uint32_t> out(heap.size());
        for (std::size_t i = heap.size(); i-- > 0;) {
            out[i] = heap.top().second;
            heap.pop();
        }
        return out;
    }

private:
    using Entry = std::pair<double, std::uint32_t>;
    using Heap = std::priority_queue<Entry>; // max-heap on (d2, index)

    struct Node {
        std::uint32_t point = 0;
        int axis = 0;
        int left = -1;
        int right = -1;
    };

    int build(std::size_t lo, std::size_t hi) {
        if (lo >= hi) return -1;
        Vec3 mn = points_[order_[lo]];
        Vec3 mx = mn;
        for (std::size_t i = lo; i < hi; ++i) {
            mn = mn.cwiseMin(points_[order_[i]]);
            mx = mx.cwiseMax(points_[order_[i]]);
        }
        int axis = 0;
        (mx - mn).maxCoeff(&axis);
        const std::size_t mid = lo + (hi - lo) / 2;
        std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(lo), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                         order_.begin() + static_cast<std::ptrdiff_t>(hi), [&](std::uint32_t a, std::uint32_t b) {
                             return points_[a][axis] < points_[b][axis] ||
                                    (points_[a][axis] == points_[b][axis] && a < b);
                         });
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({order_[mid], axis, -1, -1});
        const int l = build(lo, mid);
        const int r = build(mid + 1, hi);
        nodes_[static_cast<std::size_t>(id)].left = l;
        nodes_[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    void search(int node, const Vec3& q, std::uint32_t self, std::size_t k, Heap& heap) const {
        if (node < 0 || k == 0) return;
        const Node& n = nodes_[static_cast<std::size_t>(node)];
        const Vec3& p = points_[n.point];
        if (n.point != self) {
            const Entry e{(p - q).squaredNorm(), n.point};
            if (heap.size() < k) {
                heap.push(e);
            } else if (e < heap.top()) {
                heap.pop();
                heap.push(e);
            }
        }
        const double diff = q[n.axis] - p[n.axis];
        const int near = diff < 0 ? n.left : n.right;
        const int far = diff < 0 ? n.right : n.left;
        search(near, q, self, k, heap);
        if (heap.size() < k || diff * diff <= heap.top().first) search(far, q, self, k, heap);
    }

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

} // namespace gsdiff::detail
