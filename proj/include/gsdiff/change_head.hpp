// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include "gsdiff/math.hpp"

namespace gsdiff {

inline constexpr int kUnchangedClass = 0;
inline constexpr int kChangedClass = 1;

/// 1x1 convolution from the 16-channel feature map to two class logits
/// (row 0: unchanged, row 1: changed).
struct ChangeHead {
    Eigen::Matrix<double, 2, kEncodingDim> weights = Eigen::Matrix<double, 2, kEncodingDim>::Zero();
    Eigen::Vector2d bias = Eigen::Vector2d::Zero();

    Eigen::Vector2d logits(const Encoding& f) const { return weights * f + bias; }

    bool finite() const { return weights.allFinite() && bias.allFinite(); }

    bool operator==(const ChangeHead& o) const { return weights == o.weights && bias == o.bias; }
};

} // namespace gsdiff
