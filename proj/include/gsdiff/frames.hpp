// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsdiff/error.hpp"
#include "gsdiff/scene.hpp"

namespace gsdiff {

/// Per-pixel instance ids for one pose of the densified sequence.
struct InstanceFrame {
    int width = 0;
    int height = 0;
    std::vector<InstanceId> id_map; // 0 = background
    std::size_t pose_index = 0;
    TimeStamp epoch = TimeStamp::before;

    std::size_t pixel_count() const { return id_map.size(); }

    bool operator==(const InstanceFrame&) const = default;
};

/// Binary change map.
struct ChangeMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> mask; // 0 or 1
    std::size_t pose_index = 0;
    TimeStamp epoch = TimeStamp::before;

    static ChangeMask empty(int w, int h, std::size_t pose = 0, TimeStamp t = TimeStamp::before) {
        return ChangeMask{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0), pose, t};
    }

    std::size_t pixel_count() const { return mask.size(); }
    bool at(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
    std::size_t count() const {
        std::size_t n = 0;
        for (auto v : mask) n += v != 0;
        return n;
    }

    bool operator==(const ChangeMask&) const = default;
};

using ChangeMaskSequence = std::vector<ChangeMask>;

inline void require_same_size(const ChangeMask& a, const ChangeMask& b) {
    if (a.width != b.width || a.height != b.height || a.mask.size() != b.mask.size()) {
        throw ContractViolation("mask dimensions differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                                " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
    }
}

} // namespace gsdiff
