// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gsdiff/detail/parallel.hpp"
#include "gsdiff/error.hpp"
#include "gsdiff/math.hpp"
#include "gsdiff/pose.hpp"
#include "gsdiff/scene.hpp"

namespace gsdiff {

/// Pinhole camera. Pixel (x, y) is sampled at its centre (x + 0.5, y + 0.5).
struct Camera {
    Pose pose;
    double fx = 64.0;
    double fy = 64.0;
    double cx = 32.0;
    double cy = 32.0;
    int width = 64;
    int height = 64;
    double near = 0.1;
    double far = 100.0;

    void validate() const {
        if (width <= 0 || height <= 0) throw ValidationError("camera image size must be positive");
        if (!(near > 0.0) || !(near < far)) throw ValidationError("camera needs 0 < near < far");
        if (!(fx > 0.0) || !(fy > 0.0)) throw ValidationError("camera focal lengths must be positive");
    }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }

    Camera at(const Pose& p) const {
        Camera c = *this;
        c.pose = p;
        return c;
    }
};

inline constexpr double kCovarianceFloor = 0.3;

struct Splat {
    std::uint32_t index = 0;
    Vec2 mean = Vec2::Zero();
    Mat2 cov = Mat2::Identity();
    Mat2 conic = Mat2::Identity(); // inverse of cov
    double depth = 0.0;
    double opacity = 0.0;
    double max_eigenvalue = 0.0;
};

/// Splats sorted front to back; ties broken by lower Gaussian index.
struct SplatList {
    std::vector<Splat> splats;

    std::size_t size() const { return splats.size(); }
    bool empty() const { return splats.empty(); }
};

/// Per-pixel compositing weights in CSR layout, front to back.
struct Contributions {
    std::vector<std::uint32_t> offsets; // pixel_count + 1
    std::vector<std::uint32_t> gaussian;
    std::vector<double> weight;

    std::size_t begin(std::size_t pixel) const { return offsets[pixel]; }
    std::size_t end(std::size_t pixel) const { return offsets[pixel + 1]; }
};

/// One rendered view.
struct FrameBundle {
    int width = 0;
    int height = 0;
    std::vector<double> color;    // interleaved RGB, row major
    std::vector<double> alpha;    // H*W
    std::vector<double> depth;    // H*W, +inf where nothing was hit
    std::vector<InstanceId> id_map; // H*W, 0 = background
    std::vector<double> features; // kEncodingDim planes of H*W
    Contributions contributions;

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    std::size_t pixel(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }

    double feature(int channel, std::size_t pixel) const {
        return features[static_cast<std::size_t>(channel) * pixel_count() + pixel];
    }

    Encoding feature_vector(std::size_t pixel) const {
        Encoding f;
        for (int c = 0; c < kEncodingDim; ++c) f[c] = feature(c, pixel);
        return f;
    }
};

struct RenderOptions {
    bool early_termination = true;
    double min_transmittance = 1e-4;
    double alpha_clamp = 0.99;
    bool record_contributions = true;
    /// Pixels with less accumulated alpha than this keep the background id.
    double id_min_alpha = 0.5;
    int threads = 1;
};

/// World covariance R diag(s^2) R^T.
inline Mat3 world_covariance(const Gaussian& g) {
    const Mat3 r = g.rotation.matrix();
    return r * g.scale.array().square().matrix().asDiagonal() * r.transpose();
}

/// Projects an already-deformed cloud.
inline SplatList project_deformed(const GaussianCloud& deformed, const Camera& cam) {
    cam.validate();
    const Mat3 w2c = cam.pose.world_to_camera_rotation();
    SplatList list;
    for (std::size_t i = 0; i < deformed.size(); ++i) {
        const Gaussian& g = deformed.gaussians[i];
        const Vec3 pc = w2c * (g.position - cam.pose.translation);
        const double z = pc.z();
        if (!(z > cam.near) || !(z < cam.far)) continue;

        Eigen::Matrix<double, 2, 3> jac;
        jac << cam.fx / z, 0.0, -cam.fx * pc.x() / (z * z),
            0.0, cam.fy / z, -cam.fy * pc.y() / (z * z);
        const Mat3 cov_cam = w2c * world_covariance(g) * w2c.transpose();
        Mat2 cov = jac * cov_cam * jac.transpose();
        cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
        cov += kCovarianceFloor * Mat2::Identity();

        Splat s;
        s.index = static_cast<std::uint32_t>(i);
        s.mean = Vec2(cam.fx * pc.x() / z + cam.cx, cam.fy * pc.y() / z + cam.cy);
        s.cov = cov;
        s.conic = cov.inverse();
        s.depth = z;
        s.opacity = g.opacity;
        const double half_trace = 0.5 * (cov(0, 0) + cov(1, 1));
        const double det = cov.determinant();
        s.max_eigenvalue = half_trace + std::sqrt(std::max(0.0, half_trace * half_trace - det));

        const double r3 = 3.0 * std::sqrt(s.max_eigenvalue);
        if (s.mean.x() + r3 < 0.0 || s.mean.x() - r3 > cam.width || s.mean.y() + r3 < 0.0 ||
            s.mean.y() - r3 > cam.height) {
            continue;
        }
        list.splats.push_back(s);
    }
    std::sort(list.splats.begin(), list.splats.end(), [](const Splat& a, const Splat& b) {
        return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
    });
    return list;
}

inline SplatList project(const GaussianCloud& cloud, TimeStamp t, const Camera& cam) {
    return project_deformed(deform(cloud, t), cam);
}

namespace detail {

// Alpha below this contributes nothing measurable; used only to bound the
// pixel footprint that is scanned per splat.
inline constexpr double kNegligibleAlpha = 1e-9;

struct RowSpan {
    int y0 = 0;
    int y1 = -1;
    int x0 = 0;
    int x1 = -1;
};

inline RowSpan pixel_span(const Splat& s, const Camera& cam) {
    RowSpan span;
    if (!(s.opacity > kNegligibleAlpha)) return span;
    const double q_max = 2.0 * std::log(s.opacity / kNegligibleAlpha);
    const double r = std::sqrt(q_max * s.max_eigenvalue);
    span.x0 = std::max(0, static_cast<int>(std::floor(s.mean.x() - r - 0.5)));
    span.x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(s.mean.x() + r - 0.5)));
    span.y0 = std::max(0, static_cast<int>(std::floor(s.mean.y() - r - 0.5)));
    span.y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(s.mean.y() + r - 0.5)));
    return span;
}

inline double splat_alpha(const Splat& s, double px, double py, double clamp) {
    const double dx = px - s.mean.x();
    const double dy = py - s.mean.y();
    const double power = -0.5 * (s.conic(0, 0) * dx * dx + 2.0 * s.conic(0, 1) * dx * dy + s.conic(1, 1) * dy * dy);
    return std::clamp(s.opacity * std::exp(power), 0.0, clamp);
}

} // namespace detail

/// Front-to-back alpha compositing of color, encodings (the classification
/// feature map), depth, and the dominant instance id.
inline FrameBundle composite(const SplatList& list, const GaussianCloud& cloud, const Camera& cam,
                             const RenderOptions& opt = {}) {
    cam.validate();
    const int W = cam.width;
    const int H = cam.height;
    const std::size_t npix = cam.pixel_count();

    FrameBundle fb;
    fb.width = W;
    fb.height = H;
    fb.color.assign(3 * npix, 0.0);
    fb.alpha.assign(npix, 0.0);
    fb.depth.assign(npix, std::numeric_limits<double>::infinity());
    fb.id_map.assign(npix, 0);
    fb.features.assign(static_cast<std::size_t>(kEncodingDim) * npix, 0.0);

    // Bucket splats by the rows their footprint touches, preserving depth order.
    std::vector<detail::RowSpan> spans(list.size());
    std::vector<std::vector<std::uint32_t>> rows(static_cast<std::size_t>(H));
    for (std::size_t k = 0; k < list.size(); ++k) {
        spans[k] = detail::pixel_span(list.splats[k], cam);
        for (int y = spans[k].y0; y <= spans[k].y1; ++y) rows[static_cast<std::size_t>(y)].push_back(static_cast<std::uint32_t>(k));
    }

    std::vector<std::vector<std::uint32_t>> row_ids(static_cast<std::size_t>(H));
    std::vector<std::vector<double>> row_weights(static_cast<std::size_t>(H));
    std::vector<std::vector<std::uint32_t>> row_counts(static_cast<std::size_t>(H));

    detail::parallel_for(static_cast<std::size_t>(H), opt.threads, [&](std::size_t yy) {
        const int y = static_cast<int>(yy);
        auto& ids = row_ids[yy];
        auto& weights = row_weights[yy];
        auto& counts = row_counts[yy];
        counts.assign(static_cast<std::size_t>(W), 0);
        for (int x = 0; x < W; ++x) {
            const std::size_t p = fb.pixel(x, y);
            const double px = x + 0.5;
            const double py = y + 0.5;
            double transmittance = 1.0;
            double acc_alpha = 0.0;
            double acc_depth = 0.0;
            double best_w = 0.0;
            InstanceId best_id = 0;
            Vec3 rgb = Vec3::Zero();
            Encoding feat = Encoding::Zero();
            std::uint32_t n = 0;
            for (std::uint32_t k : rows[yy]) {
                const auto& span = spans[k];
                if (x < span.x0 || x > span.x1) continue;
                const Splat& s = list.splats[k];
                const double a = detail::splat_alpha(s, px, py, opt.alpha_clamp);
                if (a <= 0.0) continue;
                const double w = a * transmittance;
                const Gaussian& g = cloud.gaussians[s.index];
                rgb += w * g.color;
                feat += w * g.encoding;
                acc_alpha += w;
                acc_depth += w * s.depth;
                if (w > best_w) {
                    best_w = w;
                    best_id = g.instance_id;
                }
                if (opt.record_contributions) {
                    ids.push_back(s.index);
                    weights.push_back(w);
                    ++n;
                }
                transmittance *= 1.0 - a;
                if (opt.early_termination && transmittance < opt.min_transmittance) break;
            }
            counts[static_cast<std::size_t>(x)] = n;
            fb.color[3 * p + 0] = rgb.x();
            fb.color[3 * p + 1] = rgb.y();
            fb.color[3 * p + 2] = rgb.z();
            fb.alpha[p] = acc_alpha;
            if (acc_alpha > 0.0) fb.depth[p] = acc_depth / acc_alpha;
            if (acc_alpha >= opt.id_min_alpha) fb.id_map[p] = best_id;
            for (int c = 0; c < kEncodingDim; ++c) fb.features[static_cast<std::size_t>(c) * npix + p] = feat[c];
        }
    });

    if (opt.record_contributions) {
        auto& ct = fb.contributions;
        ct.offsets.assign(npix + 1, 0);
        std::size_t total = 0;
        for (const auto& r : row_ids) total += r.size();
        ct.gaussian.reserve(total);
        ct.weight.reserve(total);
        std::size_t p = 0;
        for (int y = 0; y < H; ++y) {
            const auto yy = static_cast<std::size_t>(y);
            ct.gaussian.insert(ct.gaussian.end(), row_ids[yy].begin(), row_ids[yy].end());
            ct.weight.insert(ct.weight.end(), row_weights[yy].begin(), row_weights[yy].end());
            for (int x = 0; x < W; ++x, ++p) ct.offsets[p + 1] = ct.offsets[p] + row_counts[yy][static_cast<std::size_t>(x)];
        }
    }
    return fb;
}

inline FrameBundle render_view(const GaussianCloud& cloud, TimeStamp t, const Camera& cam,
                               const RenderOptions& opt = {}) {
    return composite(project(cloud, t, cam), cloud, cam, opt);
}

/// Recomputes the feature planes of `fb` from its recorded weights and the
/// current encodings. Geometry is taken as fixed.
inline void recomposite_features(FrameBundle& fb, const GaussianCloud& cloud) {
    const std::size_t npix = fb.pixel_count();
    const auto& ct = fb.contributions;
    if (ct.offsets.size() != npix + 1) throw ContractViolation("frame has no recorded contributions");
    for (std::size_t p = 0; p < npix; ++p) {
        Encoding f = Encoding::Zero();
        for (std::size_t k = ct.begin(p); k < ct.end(p); ++k) f += ct.weight[k] * cloud.gaussians[ct.gaussian[k]].encoding;
        for (int c = 0; c < kEncodingDim; ++c) fb.features[static_cast<std::size_t>(c) * npix + p] = f[c];
    }
}

} // namespace gsdiff
