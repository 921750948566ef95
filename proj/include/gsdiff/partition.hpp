// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "gsdiff/change_head.hpp"
#include "gsdiff/detail/knn.hpp"
#include "gsdiff/detail/parallel.hpp"
#include "gsdiff/error.hpp"
#include "gsdiff/frames.hpp"
#include "gsdiff/raster.hpp"
#include "gsdiff/scene.hpp"

namespace gsdiff {

enum class Optimizer { gradient_descent, adam };

struct TrainConfig {
    double lambda_2d = 1.0;
    double lambda_3d = 0.1;
    int k_neighbors = 5;
    int m_samples = 1000; // capped at the cloud size
    double learning_rate = 0.05;
    int iterations = 500;
    double tv_weight = 1.0;
    std::uint64_t rng_seed = 0;
    double init_std = 0.01;
    Optimizer optimizer = Optimizer::adam;
    int threads = 1;

    void validate() const {
        std::vector<std::string> bad;
        if (k_neighbors < 1) bad.push_back("k_neighbors must be >= 1");
        if (m_samples < 1) bad.push_back("m_samples must be >= 1");
        if (!(learning_rate > 0.0)) bad.push_back("learning_rate must be positive");
        if (iterations < 0) bad.push_back("iterations must be >= 0");
        if (!(init_std >= 0.0)) bad.push_back("init_std must be >= 0");
        if (!bad.empty()) {
            std::string msg = "invalid training config:";
            for (const auto& b : bad) msg += "\n  - " + b;
            throw ValidationError(msg);
        }
    }
};

/// Two class logits per pixel, planar: [class][pixel].
struct Logits {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    double at(int cls, std::size_t pixel) const { return data[static_cast<std::size_t>(cls) * pixel_count() + pixel]; }
};

inline Logits change_logits(const FrameBundle& fb, const ChangeHead& head) {
    const std::size_t npix = fb.pixel_count();
    if (fb.features.size() != static_cast<std::size_t>(kEncodingDim) * npix) {
        throw ContractViolation("feature map does not match frame dimensions");
    }
    Logits out{fb.width, fb.height, std::vector<double>(2 * npix)};
    for (std::size_t p = 0; p < npix; ++p) {
        const Eigen::Vector2d z = head.logits(fb.feature_vector(p));
        out.data[p] = z[0];
        out.data[npix + p] = z[1];
    }
    return out;
}

/// Pixel is changed iff its changed logit strictly exceeds the unchanged one.
inline ChangeMask change_map(const Logits& logits, std::size_t pose_index = 0, TimeStamp epoch = TimeStamp::before) {
    ChangeMask m = ChangeMask::empty(logits.width, logits.height, pose_index, epoch);
    for (std::size_t p = 0; p < logits.pixel_count(); ++p) m.mask[p] = logits.at(kChangedClass, p) > logits.at(kUnchangedClass, p);
    return m;
}

namespace detail {

inline Eigen::Vector2d softmax2(const Eigen::Vector2d& z) {
    const double m = z.maxCoeff();
    const Eigen::Vector2d e = (z.array() - m).exp().matrix();
    return e / e.sum();
}

inline constexpr double kLogFloor = 1e-12;

} // namespace detail

/// Mean two-class cross entropy between softmax(logits) and the one-hot mask.
inline double loss_2d(const Logits& logits, const ChangeMask& mask) {
    if (logits.width != mask.width || logits.height != mask.height) throw ContractViolation("logits and mask differ in size");
    const std::size_t npix = logits.pixel_count();
    if (npix == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t p = 0; p < npix; ++p) {
        const Eigen::Vector2d prob = detail::softmax2({logits.at(0, p), logits.at(1, p)});
        const int label = mask.mask[p] ? kChangedClass : kUnchangedClass;
        sum -= std::log(std::max(prob[label], detail::kLogFloor));
    }
    return sum / static_cast<double>(npix);
}

/// Class distribution of a single Gaussian's encoding.
inline Eigen::Vector2d class_distribution(const ChangeHead& head, const Encoding& e) {
    return detail::softmax2(head.logits(e));
}

inline std::vector<Vec3> anchor_positions(const GaussianCloud& cloud) {
    const GaussianCloud before = deform(cloud, TimeStamp::before);
    std::vector<Vec3> pts;
    pts.reserve(before.size());
    for (const auto& g : before.gaussians) pts.push_back(g.position);
    return pts;
}

/// k nearest neighbours (by before-epoch position) of every Gaussian.
inline std::vector<std::vector<std::uint32_t>> neighbor_table(const GaussianCloud& cloud, int k) {
    if (k < 1 || static_cast<std::size_t>(k) >= cloud.size()) {
        throw ValidationError("k_neighbors (" + std::to_string(k) + ") must be in [1, cloud size - 1] (cloud has " +
                              std::to_string(cloud.size()) + ")");
    }
    const detail::KdTree tree(anchor_positions(cloud));
    std::vector<std::vector<std::uint32_t>> nn(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) nn[i] = tree.nearest_excluding(static_cast<std::uint32_t>(i), k);
    return nn;
}

/// Gaussians sampled for the 3D regularizer. When every Gaussian is
/// requested the identity order is used; otherwise a seeded partial shuffle.
inline std::vector<std::uint32_t> sample_gaussians(std::size_t n, int m, std::uint64_t seed, std::uint64_t round = 0) {
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    const std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(m));
    if (take == n) return idx;
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ull * (round + 1)));
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(take);
    return idx;
}

struct Gradients {
    std::vector<Encoding> d_encodings;
    Eigen::Matrix<double, 2, kEncodingDim> d_weights = Eigen::Matrix<double, 2, kEncodingDim>::Zero();
    Eigen::Vector2d d_bias = Eigen::Vector2d::Zero();

    explicit Gradients(std::size_t n = 0) : d_encodings(n, Encoding::Zero()) {}

    void add(const Gradients& o, double scale = 1.0) {
        for (std::size_t i = 0; i < d_encodings.size(); ++i) d_encodings[i] += scale * o.d_encodings[i];
        d_weights += scale * o.d_weights;
        d_bias += scale * o.d_bias;
    }

    bool finite() const {
        for (const auto& e : d_encodings)
            if (!e.allFinite()) return false;
        return d_weights.allFinite() && d_bias.allFinite();
    }
};

namespace detail {

// Mean KL(F(e_s) || F(e_n)) over samples and their neighbours; accumulates
// the gradient scaled by `scale` when `grad` is given.
inline double loss_3d_impl(const GaussianCloud& cloud, const ChangeHead& head,
                           const std::vector<std::uint32_t>& samples,
                           const std::vector<std::vector<std::uint32_t>>& neighbors, Gradients* grad, double scale) {
    if (samples.empty()) return 0.0;
    const std::size_t k = neighbors[samples.front()].size();
    const double norm = 1.0 / static_cast<double>(samples.size() * k);
    double total = 0.0;
    for (std::uint32_t s : samples) {
        const Encoding& es = cloud.gaussians[s].encoding;
        const Eigen::Vector2d p = class_distribution(head, es);
        const Eigen::Vector2d log_p = p.array().max(kLogFloor).log().matrix();
        for (std::uint32_t n : neighbors[s]) {
            const Encoding& en = cloud.gaussians[n].encoding;
            const Eigen::Vector2d q = class_distribution(head, en);
            const Eigen::Vector2d ratio = log_p - q.array().max(kLogFloor).log().matrix();
            const double kl = p.dot(ratio);
            total += kl;
            if (grad) {
                const double c = scale * norm;
                const Eigen::Vector2d dz_s = c * p.cwiseProduct(ratio.array().matrix() - Eigen::Vector2d::Constant(kl));
                const Eigen::Vector2d dz_n = c * (q - p);
                grad->d_encodings[s] += head.weights.transpose() * dz_s;
                grad->d_encodings[n] += head.weights.transpose() * dz_n;
                grad->d_weights += dz_s * es.transpose() + dz_n * en.transpose();
                grad->d_bias += dz_s + dz_n;
            }
        }
    }
    return std::max(0.0, total * norm);
}

} // namespace detail

/// Spatial-consistency regularizer over `m` sampled Gaussians and their `k`
/// nearest neighbours.
inline double loss_3d(const GaussianCloud& cloud, const ChangeHead& head, const TrainConfig& cfg,
                      std::uint64_t round = 0) {
    cfg.validate();
    const auto nn = neighbor_table(cloud, cfg.k_neighbors);
    const auto samples = sample_gaussians(cloud.size(), cfg.m_samples, cfg.rng_seed, round);
    return detail::loss_3d_impl(cloud, head, samples, nn, nullptr, 0.0);
}

/// A training view with frozen geometry: the recorded compositing weights
/// plus the target photograph.
struct TrainingView {
    FrameBundle frame;
    std::vector<double> target; // interleaved RGB
    TimeStamp epoch = TimeStamp::before;
};

using RenderPack = std::vector<TrainingView>;

struct LossReport {
    double l1 = 0.0;
    double ltv = 0.0;
    double l2d = 0.0;
    double l3d = 0.0;
    double total = 0.0;

    bool operator==(const LossReport&) const = default;
};

/// Mean anisotropic total variation of an interleaved RGB image.
inline double total_variation(const std::vector<double>& rgb, int width, int height) {
    double sum = 0.0;
    std::size_t terms = 0;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * width + x;
            for (int c = 0; c < 3; ++c) {
                if (x + 1 < width) {
                    sum += std::abs(rgb[3 * (p + 1) + c] - rgb[3 * p + c]);
                    ++terms;
                }
                if (y + 1 < height) {
                    sum += std::abs(rgb[3 * (p + width) + c] - rgb[3 * p + c]);
                    ++terms;
                }
            }
        }
    }
    return terms ? sum / static_cast<double>(terms) : 0.0;
}

inline double mean_abs_error(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ContractViolation("image sizes differ");
    if (a.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

/// Precomputed pieces of the objective that do not depend on encodings or head.
struct LossContext {
    std::vector<std::vector<std::uint32_t>> neighbors;
    std::vector<std::uint32_t> samples;
};

inline LossContext make_loss_context(const GaussianCloud& cloud, const TrainConfig& cfg, std::uint64_t round = 0) {
    LossContext ctx;
    if (cfg.lambda_3d != 0.0) {
        ctx.neighbors = neighbor_table(cloud, cfg.k_neighbors);
        ctx.samples = sample_gaussians(cloud.size(), cfg.m_samples, cfg.rng_seed, round);
    }
    return ctx;
}

/// Full objective L1 + tv*L_TV + l2d*L_2d + l3d*L_3d and its analytic gradient
/// w.r.t. every encoding and the head. Feature maps are recomposited from the
/// recorded weights, so f = sum_i w_i e_i and df/de_i = w_i.
inline LossReport total_loss(const RenderPack& pack, const ChangeMaskSequence& masks, const GaussianCloud& cloud,
                             const ChangeHead& head, const TrainConfig& cfg, const LossContext& ctx,
                             Gradients* grad = nullptr) {
    if (pack.size() != masks.size()) throw ContractViolation("render pack and mask list differ in length");
    const std::size_t n = cloud.size();
    const std::size_t views = pack.size();
    if (grad) *grad = Gradients(n);

    std::vector<double> l1(views, 0.0), ltv(views, 0.0), l2d(views, 0.0);
    std::vector<Gradients> view_grads(grad ? views : 0);

    detail::parallel_for(views, cfg.threads, [&](std::size_t v) {
        const TrainingView& tv = pack[v];
        const FrameBundle& fb = tv.frame;
        const ChangeMask& mask = masks[v];
        if (fb.width != mask.width || fb.height != mask.height) {
            throw ContractViolation("view " + std::to_string(v) + ": mask size differs from render size");
        }
        const std::size_t npix = fb.pixel_count();
        const auto& ct = fb.contributions;
        if (ct.offsets.size() != npix + 1) throw ContractViolation("view " + std::to_string(v) + " has no recorded weights");

        l1[v] = tv.target.empty() ? 0.0 : mean_abs_error(fb.color, tv.target);
        ltv[v] = total_variation(fb.color, fb.width, fb.height);

        Gradients* g = grad ? &view_grads[v] : nullptr;
        if (g) *g = Gradients(n);
        const double inv = npix ? 1.0 / static_cast<double>(npix) : 0.0;
        double ce = 0.0;
        for (std::size_t p = 0; p < npix; ++p) {
            Encoding f = Encoding::Zero();
            for (std::size_t k = ct.begin(p); k < ct.end(p); ++k) f += ct.weight[k] * cloud.gaussians[ct.gaussian[k]].encoding;
            const Eigen::Vector2d prob = detail::softmax2(head.logits(f));
            const int label = mask.mask[p] ? kChangedClass : kUnchangedClass;
            ce -= std::log(std::max(prob[label], detail::kLogFloor));
            if (g) {
                Eigen::Vector2d dz = prob;
                dz[label] -= 1.0;
                dz *= inv;
                g->d_bias += dz;
                g->d_weights += dz * f.transpose();
                const Encoding df = head.weights.transpose() * dz;
                for (std::size_t k = ct.begin(p); k < ct.end(p); ++k) g->d_encodings[ct.gaussian[k]] += ct.weight[k] * df;
            }
        }
        l2d[v] = ce * inv;
    });

    LossReport r;
    const double vnorm = views ? 1.0 / static_cast<double>(views) : 0.0;
    for (std::size_t v = 0; v < views; ++v) {
        r.l1 += l1[v] * vnorm;
        r.ltv += ltv[v] * vnorm;
        r.l2d += l2d[v] * vnorm;
        if (grad) grad->add(view_grads[v], cfg.lambda_2d * vnorm);
    }
    if (cfg.lambda_3d != 0.0) {
        if (ctx.neighbors.size() != n) throw ContractViolation("loss context was built for a different cloud");
        r.l3d = detail::loss_3d_impl(cloud, head, ctx.samples, ctx.neighbors, grad, cfg.lambda_3d);
    }
    r.total = r.l1 + cfg.tv_weight * r.ltv + cfg.lambda_2d * r.l2d + cfg.lambda_3d * r.l3d;
    return r;
}

inline LossReport total_loss(const RenderPack& pack, const ChangeMaskSequence& masks, const GaussianCloud& cloud,
                             const ChangeHead& head, const TrainConfig& cfg, Gradients* grad = nullptr) {
    return total_loss(pack, masks, cloud, head, cfg, make_loss_context(cloud, cfg), grad);
}

/// Renders every training view once and records its compositing weights.
inline RenderPack build_render_pack(const GaussianCloud& cloud, const std::vector<Camera>& cameras,
                                    const std::vector<TimeStamp>& epochs, int threads = 1) {
    if (cameras.size() != epochs.size()) throw ContractViolation("camera and epoch lists differ in length");
    RenderPack pack(cameras.size());
    RenderOptions opt;
    opt.threads = threads;
    for (std::size_t v = 0; v < cameras.size(); ++v) {
        pack[v].frame = render_view(cloud, epochs[v], cameras[v], opt);
        pack[v].target = pack[v].frame.color;
        pack[v].epoch = epochs[v];
    }
    return pack;
}

struct TrainResult {
    GaussianCloud cloud;
    ChangeHead head;
    std::vector<LossReport> curve; // loss before each step, then the final loss
};

namespace detail {

struct AdamState {
    std::vector<Encoding> m_e, v_e;
    Eigen::Matrix<double, 2, kEncodingDim> m_w = Eigen::Matrix<double, 2, kEncodingDim>::Zero();
    Eigen::Matrix<double, 2, kEncodingDim> v_w = Eigen::Matrix<double, 2, kEncodingDim>::Zero();
    Eigen::Vector2d m_b = Eigen::Vector2d::Zero();
    Eigen::Vector2d v_b = Eigen::Vector2d::Zero();
};

template <class T>
void adam_update(T& param, const T& g, T& m, T& v, double lr, double c1, double c2) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param -= (lr * (m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
}

} // namespace detail

/// Learns the classification encodings and the change head with geometry,
/// colors and opacities frozen.
inline TrainResult train(const GaussianCloud& cloud, const RenderPack& pack, const ChangeMaskSequence& masks,
                         const TrainConfig& cfg) {
    cfg.validate();
    if (pack.size() != masks.size()) throw ContractViolation("render pack and mask list differ in length");
    TrainResult out{cloud, ChangeHead{}, {}};
    if (cfg.iterations == 0) return out;

    std::mt19937_64 rng(cfg.rng_seed);
    std::normal_distribution<double> normal(0.0, cfg.init_std);
    for (auto& g : out.cloud.gaussians)
        for (int k = 0; k < kEncodingDim; ++k) g.encoding[k] = normal(rng);

    const bool resample = cfg.lambda_3d != 0.0 && static_cast<std::size_t>(cfg.m_samples) < cloud.size();
    LossContext ctx = make_loss_context(out.cloud, cfg, 0);
    detail::AdamState adam;
    adam.m_e.assign(cloud.size(), Encoding::Zero());
    adam.v_e.assign(cloud.size(), Encoding::Zero());

    Gradients grad;
    for (int it = 0; it < cfg.iterations; ++it) {
        if (resample && it > 0) ctx.samples = sample_gaussians(cloud.size(), cfg.m_samples, cfg.rng_seed, static_cast<std::uint64_t>(it));
        const LossReport rep = total_loss(pack, masks, out.cloud, out.head, cfg, ctx, &grad);
        if (!std::isfinite(rep.total) || !grad.finite()) {
            throw DivergenceError("training diverged at iteration " + std::to_string(it) + " (loss " +
                                  std::to_string(rep.total) + ", l2d " + std::to_string(rep.l2d) + ", l3d " +
                                  std::to_string(rep.l3d) + "); lower the learning rate");
        }
        out.curve.push_back(rep);
        const double lr = cfg.learning_rate;
        if (cfg.optimizer == Optimizer::gradient_descent) {
            for (std::size_t i = 0; i < cloud.size(); ++i) out.cloud.gaussians[i].encoding -= lr * grad.d_encodings[i];
            out.head.weights -= lr * grad.d_weights;
            out.head.bias -= lr * grad.d_bias;
        } else {
            const double c1 = 1.0 - std::pow(0.9, it + 1);
            const double c2 = 1.0 - std::pow(0.999, it + 1);
            for (std::size_t i = 0; i < cloud.size(); ++i) {
                detail::adam_update(out.cloud.gaussians[i].encoding, grad.d_encodings[i], adam.m_e[i], adam.v_e[i], lr, c1, c2);
            }
            detail::adam_update(out.head.weights, grad.d_weights, adam.m_w, adam.v_w, lr, c1, c2);
            detail::adam_update(out.head.bias, grad.d_bias, adam.m_b, adam.v_b, lr, c1, c2);
        }
    }
    const LossReport last = total_loss(pack, masks, out.cloud, out.head, cfg, ctx, nullptr);
    if (!std::isfinite(last.total)) throw DivergenceError("training diverged after the final step");
    out.curve.push_back(last);
    return out;
}

/// Labels Gaussian i changed iff P(changed | e_i) > tau.
inline GaussianCloud partition_cloud(const GaussianCloud& cloud, const ChangeHead& head, double tau = 0.5) {
    GaussianCloud out = cloud;
    out.partition.assign(cloud.size(), PartitionLabel::unchanged);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (class_distribution(head, cloud.gaussians[i].encoding)[kChangedClass] > tau) {
            out.partition[i] = PartitionLabel::changed;
        }
    }
    return out;
}

/// Change map for an arbitrary view: render the feature map, apply the head.
inline ChangeMask render_change_map(const GaussianCloud& cloud, const ChangeHead& head, TimeStamp t, const Camera& cam,
                                    int threads = 1) {
    RenderOptions opt;
    opt.record_contributions = false;
    opt.threads = threads;
    const FrameBundle fb = render_view(cloud, t, cam, opt);
    return change_map(change_logits(fb, head), 0, t);
}

} // namespace gsdiff
