// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsdiff/baseline.hpp"
#include "gsdiff/cloud_io.hpp"
#include "gsdiff/config.hpp"
#include "gsdiff/eval.hpp"
#include "gsdiff/image_io.hpp"
#include "gsdiff/partition.hpp"
#include "gsdiff/pose.hpp"
#include "gsdiff/pose_io.hpp"
#include "gsdiff/raster.hpp"
#include "gsdiff/scene.hpp"
#include "gsdiff/segmentation.hpp"

namespace gsdiff {

namespace fs = std::filesystem;

struct Intrinsics {
    int width = 64;
    int height = 64;
    double fx = 75.0;
    double fy = 75.0;
    double cx = 32.0;
    double cy = 32.0;
    double near = 0.1;
    double far = 100.0;

    Camera camera(const Pose& pose) const { return Camera{pose, fx, fy, cx, cy, width, height, near, far}; }
};

struct PipelineConfig {
    std::string preset = "acceptance"; // acceptance | adversarial | nochange
    std::string scene_path;            // external cloud instead of a preset
    std::string poses_before;
    std::string poses_after;
    std::string poses_eval;
    Intrinsics camera;
    int poses_per_epoch = 20;
    int n_interp = 3;
    int eval_views = 10;
    std::string eval_epoch = "before"; // before | after | both
    std::string segmentation_source = "oracle";
    std::string ingest_dir;
    std::string ingest_manifest;
    int min_pixels = 8;
    int persist_k = 3;
    bool flag_low_iou = false;
    double iou_threshold = 0.7;
    TrainConfig train;
    double tau = 0.5;
    DeltaThresholds baseline;
    std::string out = "gsdiff_out";
    std::uint64_t seed = 0;
    int threads = 1;

    std::vector<TimeStamp> eval_epochs() const {
        if (eval_epoch == "both") return {TimeStamp::before, TimeStamp::after};
        return {parse_timestamp(eval_epoch)};
    }
};

/// Builds and validates a pipeline config. Every problem is reported at once.
inline PipelineConfig pipeline_config(const KeyValueConfig& kv) {
    PipelineConfig c;
    ConfigReader r(kv);
    r.read("preset", c.preset);
    r.read("scene", c.scene_path);
    r.read("poses.before", c.poses_before);
    r.read("poses.after", c.poses_after);
    r.read("poses.eval", c.poses_eval);
    r.read("poses.per_epoch", c.poses_per_epoch);
    r.read("poses.n_interp", c.n_interp);
    r.read("camera.width", c.camera.width);
    r.read("camera.height", c.camera.height);
    r.read("camera.fx", c.camera.fx);
    r.read("camera.fy", c.camera.fy);
    r.read("camera.cx", c.camera.cx);
    r.read("camera.cy", c.camera.cy);
    r.read("camera.near", c.camera.near);
    r.read("camera.far", c.camera.far);
    r.read("eval.views", c.eval_views);
    r.read("eval.epoch", c.eval_epoch);
    r.read("segmentation.source", c.segmentation_source);
    r.read("segmentation.ingest_dir", c.ingest_dir);
    r.read("segmentation.manifest", c.ingest_manifest);
    r.read("detect.min_pixels", c.min_pixels);
    r.read("detect.persist_k", c.persist_k);
    r.read("detect.flag_low_iou", c.flag_low_iou);
    r.read("detect.iou_threshold", c.iou_threshold);
    r.read("train.lambda_2d", c.train.lambda_2d);
    r.read("train.lambda_3d", c.train.lambda_3d);
    r.read("train.k_neighbors", c.train.k_neighbors);
    r.read("train.m_samples", c.train.m_samples);
    r.read("train.learning_rate", c.train.learning_rate);
    r.read("train.iterations", c.train.iterations);
    r.read("train.tv_weight", c.train.tv_weight);
    r.read("train.init_std", c.train.init_std);
    std::string optimizer = c.train.optimizer == Optimizer::adam ? "adam" : "gd";
    r.read("train.optimizer", optimizer);
    r.read("partition.tau", c.tau);
    r.read("baseline.pos_thresh", c.baseline.pos_thresh);
    r.read("baseline.rot_thresh", c.baseline.rot_thresh);
    r.read("baseline.scale_thresh", c.baseline.scale_thresh);
    r.read("out", c.out);
    r.read("seed", c.seed);
    r.read("threads", c.threads);
    c.train.rng_seed = c.seed;
    r.read("train.seed", c.train.rng_seed);

    if (optimizer == "adam") {
        c.train.optimizer = Optimizer::adam;
    } else if (optimizer == "gd") {
        c.train.optimizer = Optimizer::gradient_descent;
    } else {
        r.fail("train.optimizer: expected adam|gd, got '" + optimizer + "'");
    }
    if (c.preset != "acceptance" && c.preset != "adversarial" && c.preset != "nochange") {
        r.fail("preset: expected acceptance|adversarial|nochange, got '" + c.preset + "'");
    }
    const auto must_exist = [&](const std::string& key, const std::string& path) {
        if (!path.empty() && !fs::exists(path)) r.fail(key + ": path '" + path + "' does not exist");
    };
    must_exist("scene", c.scene_path);
    must_exist("poses.before", c.poses_before);
    must_exist("poses.after", c.poses_after);
    must_exist("poses.eval", c.poses_eval);
    if (!c.scene_path.empty() && (c.poses_before.empty() || c.poses_after.empty() || c.poses_eval.empty())) {
        r.fail("scene: an external cloud needs poses.before, poses.after and poses.eval");
    }
    if (c.segmentation_source == "oracle") {
        if (!c.ingest_dir.empty()) r.fail("segmentation: source is 'oracle' but ingest_dir is also set");
    } else if (c.segmentation_source == "ingest") {
        if (c.ingest_dir.empty()) r.fail("segmentation.ingest_dir: required when source is 'ingest'");
        must_exist("segmentation.ingest_dir", c.ingest_dir);
        if (c.ingest_manifest.empty()) c.ingest_manifest = (fs::path(c.ingest_dir) / "manifest.json").string();
        must_exist("segmentation.manifest", c.ingest_manifest);
    } else {
        r.fail("segmentation.source: expected oracle|ingest, got '" + c.segmentation_source + "'");
    }
    if (c.camera.width <= 0 || c.camera.height <= 0) r.fail("camera: width and height must be positive");
    if (!(c.camera.fx > 0) || !(c.camera.fy > 0)) r.fail("camera: focal lengths must be positive");
    if (!(c.camera.near > 0) || !(c.camera.near < c.camera.far)) r.fail("camera: need 0 < near < far");
    if (c.poses_per_epoch < 2) r.fail("poses.per_epoch must be >= 2");
    if (c.n_interp < 0) r.fail("poses.n_interp must be >= 0");
    if (c.eval_views < 1) r.fail("eval.views must be >= 1");
    if (c.eval_epoch != "before" && c.eval_epoch != "after" && c.eval_epoch != "both") {
        r.fail("eval.epoch: expected before|after|both, got '" + c.eval_epoch + "'");
    }
    if (c.min_pixels < 0) r.fail("detect.min_pixels must be >= 0");
    if (c.persist_k < 1) r.fail("detect.persist_k must be >= 1");
    if (c.train.k_neighbors < 1) r.fail("train.k_neighbors must be >= 1");
    if (c.train.m_samples < 1) r.fail("train.m_samples must be >= 1");
    if (!(c.train.learning_rate > 0)) r.fail("train.learning_rate must be positive");
    if (c.train.iterations < 0) r.fail("train.iterations must be >= 0");
    if (c.baseline.pos_thresh < 0 || c.baseline.rot_thresh < 0 || c.baseline.scale_thresh < 0) {
        r.fail("baseline: thresholds must be non-negative");
    }
    if (c.threads < 1) r.fail("threads must be >= 1");
    r.finish();
    c.train.threads = c.threads;
    return c;
}

// --- presets ----------------------------------------------------------------

inline SceneSpec preset_scene_spec(const std::string& preset) {
    SceneSpec s;
    if (preset == "nochange") {
        s.changes.clear();
    } else if (preset == "adversarial") {
        s.shared_gaussian = true;
        s.delta_noise = 0.01;
        s.hidden_spin_radius = 0.8;
    }
    return s;
}

/// Camera on a circle of `radius` at `height`, looking at the origin.
inline Pose orbit_pose(double azimuth_deg, double radius, double height, TimeStamp epoch) {
    const double a = azimuth_deg * std::numbers::pi / 180.0;
    Pose p = look_at(Vec3(radius * std::cos(a), radius * std::sin(a), height), Vec3::Zero());
    p.epoch = epoch;
    return p;
}

inline PoseSequence orbit_arc(double from_deg, double to_deg, int count, double radius, double height, TimeStamp epoch) {
    PoseSequence seq;
    seq.epoch = epoch;
    for (int i = 0; i < count; ++i) {
        const double u = count > 1 ? static_cast<double>(i) / (count - 1) : 0.0;
        seq.poses.push_back(orbit_pose(from_deg + u * (to_deg - from_deg), radius, height, epoch));
    }
    return seq;
}

struct PresetPoses {
    PoseSequence before;
    PoseSequence after;
    PoseSequence eval;
};

/// Two overlapping capture arcs and held-out views at other heights and
/// azimuths.
inline PresetPoses preset_poses(const PipelineConfig& c) {
    PresetPoses p;
    p.before = orbit_arc(-100.0, 100.0, c.poses_per_epoch, 2.1, 3.5, TimeStamp::before);
    p.after = orbit_arc(-40.0, 160.0, c.poses_per_epoch, 2.2, 3.3, TimeStamp::after);
    p.eval.epoch = TimeStamp::before;
    for (int i = 0; i < c.eval_views; ++i) {
        const double az = -90.0 + 180.0 * (i + 0.5) / c.eval_views;
        const double height = 3.1 + 0.3 * (i % 3);
        p.eval.poses.push_back(orbit_pose(az, 2.0, height, TimeStamp::before));
    }
    return p;
}

// --- workspace layout --------------------------------------------------------

struct Workspace {
    fs::path root;

    fs::path scene() const { return root / "scene.gsdf"; }
    fs::path ground_truth() const { return root / "gt_changed.json"; }
    fs::path poses_before() const { return root / "poses" / "before.json"; }
    fs::path poses_after() const { return root / "poses" / "after.json"; }
    fs::path poses_eval() const { return root / "poses" / "eval.json"; }
    fs::path dense(int seq) const { return root / "detect" / ("poses_dense_" + std::to_string(seq) + ".json"); }
    fs::path masks(int seq) const { return root / "detect" / ("M" + std::to_string(seq)); }
    fs::path detect_report() const { return root / "detect" / "changed_ids.json"; }
    fs::path trained() const { return root / "train" / "trained.gsdf"; }
    fs::path loss_csv() const { return root / "train" / "loss.csv"; }
    fs::path render_dir() const { return root / "render"; }
    fs::path pred_dir() const { return root / "render" / "pred"; }
    fs::path gt_dir() const { return root / "render" / "gt"; }
    fs::path metrics_csv() const { return root / "eval" / "metrics.csv"; }
    fs::path baseline_dir() const { return root / "baseline"; }
};

/// Output directory, honouring the GSDIFF_OUT override.
inline Workspace workspace(const PipelineConfig& c) {
    if (const char* env = std::getenv("GSDIFF_OUT"); env && *env) return Workspace{fs::path(env)};
    return Workspace{fs::path(c.out)};
}

inline std::string mask_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "mask_%04zu.pgm", index);
    return buf;
}

inline std::string view_name(std::size_t view, TimeStamp t, const char* ext) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "view_%02zu_%s.%s", view, to_string(t), ext);
    return buf;
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { detail::write_file_atomic(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const fs::path& path) {
    const auto buf = detail::read_file(path);
    try {
        return nlohmann::json::parse(buf.begin(), buf.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), e.byte);
    }
}

inline IdSet load_ground_truth(const Workspace& ws) {
    const nlohmann::json j = read_json(ws.ground_truth());
    IdSet ids;
    for (const auto& v : j.at("changed_ids")) ids.insert(v.get<InstanceId>());
    return ids;
}

/// Pixels whose dominant Gaussian belongs to a changed instance.
inline ChangeMask ground_truth_mask(const GaussianCloud& cloud, const IdSet& changed, TimeStamp t, const Camera& cam,
                                    int threads = 1) {
    RenderOptions opt;
    opt.record_contributions = false;
    opt.threads = threads;
    const FrameBundle fb = render_view(cloud, t, cam, opt);
    InstanceFrame f{fb.width, fb.height, fb.id_map, 0, t};
    return mask_of_ids(f, changed);
}

// --- stages ------------------------------------------------------------------

struct GenerateResult {
    std::size_t gaussians = 0;
    IdSet changed_ids;
};

inline GenerateResult cmd_generate(const PipelineConfig& c, std::ostream& log) {
    const Workspace ws = workspace(c);
    GenerateResult res;
    if (!c.scene_path.empty()) {
        const CloudFile file = load_cloud_file(c.scene_path);
        save_cloud(file, ws.scene());
        save_poses(load_poses(c.poses_before), ws.poses_before());
        save_poses(load_poses(c.poses_after), ws.poses_after());
        save_poses(load_poses(c.poses_eval), ws.poses_eval());
        res.gaussians = file.cloud.size();
        log << "generate: imported " << res.gaussians << " gaussians from " << c.scene_path << "\n";
        return res;
    }
    const SyntheticScene scene = generate_synthetic_scene(preset_scene_spec(c.preset), c.seed);
    const PresetPoses poses = preset_poses(c);
    save_cloud(scene.cloud, ws.scene());
    save_poses(poses.before, ws.poses_before());
    save_poses(poses.after, ws.poses_after());
    save_poses(poses.eval, ws.poses_eval());
    nlohmann::json gt = {{"preset", c.preset}, {"seed", c.seed}, {"changed_ids", scene.changed_ids}};
    if (scene.shared_index) gt["shared_gaussian"] = *scene.shared_index;
    write_json(ws.ground_truth(), gt);
    res.gaussians = scene.cloud.size();
    res.changed_ids = scene.changed_ids;
    log << "generate: preset '" << c.preset << "' with " << res.gaussians << " gaussians, "
        << scene.changed_ids.size() << " changed instance(s)\n";
    return res;
}

struct DetectResult {
    PoseSequence dense_1;
    PoseSequence dense_2;
    ChangeMaskSequence m1; // before-epoch masks over the densified before poses
    ChangeMaskSequence m2; // after-epoch masks over the densified after poses
    IdSet changed_ids;
    std::map<InstanceId, int> flag_counts;
};

inline DetectResult cmd_detect(const PipelineConfig& c, std::ostream& log) {
    const Workspace ws = workspace(c);
    const GaussianCloud cloud = load_cloud(ws.scene());
    const PoseSequence before = load_poses(ws.poses_before());
    const PoseSequence after = load_poses(ws.poses_after());

    // Interpolate over the merged capture list; the cross-epoch gap gets nothing.
    const PoseSequence dense = densify(merge(before, after), c.n_interp);
    auto [dense_1, dense_2] = split_epochs(dense);
    const std::size_t n1 = dense_1.size();

    std::vector<InstanceFrame> frames_before(dense.size()), frames_after(dense.size());
    if (c.segmentation_source == "oracle") {
        RenderOptions opt;
        opt.record_contributions = false;
        detail::parallel_for(dense.size(), c.threads, [&](std::size_t i) {
            const Camera cam = c.camera.camera(dense[i]);
            frames_before[i] = oracle_segment(render_view(cloud, TimeStamp::before, cam, opt), c.min_pixels, i, TimeStamp::before);
            frames_after[i] = oracle_segment(render_view(cloud, TimeStamp::after, cam, opt), c.min_pixels, i, TimeStamp::after);
        });
    } else {
        const auto frames = ingest_masks(c.ingest_dir, fs::path(c.ingest_manifest),
                                         IngestExpectation{dense.size(), c.camera.width, c.camera.height});
        std::vector<int> have(2 * dense.size(), 0);
        for (const auto& f : frames) {
            (f.epoch == TimeStamp::before ? frames_before : frames_after)[f.pose_index] = f;
            have[static_cast<std::size_t>(f.epoch) * dense.size() + f.pose_index] = 1;
        }
        for (std::size_t i = 0; i < have.size(); ++i) {
            if (!have[i]) {
                throw ValidationError("manifest has no " + std::string(i < dense.size() ? "before" : "after") +
                                      " frame for pose_index " + std::to_string(i % dense.size()));
            }
        }
    }

    DetectOptions opt;
    opt.persist_k = c.persist_k;
    opt.diff.flag_low_iou = c.flag_low_iou;
    opt.diff.iou_threshold = c.iou_threshold;
    opt.threads = c.threads;
    DetectionResult det = detect_sequence(frames_before, frames_after, opt);

    DetectResult res;
    res.changed_ids = det.changed_ids;
    res.flag_counts = det.flag_counts;
    for (std::size_t i = 0; i < dense.size(); ++i) {
        if (i < n1) {
            ChangeMask m = det.before_masks[i];
            m.pose_index = i;
            res.m1.push_back(std::move(m));
        } else {
            ChangeMask m = det.after_masks[i];
            m.pose_index = i - n1;
            res.m2.push_back(std::move(m));
        }
    }
    for (std::size_t i = 0; i < res.m1.size(); ++i) write_mask(ws.masks(1) / mask_name(i), res.m1[i]);
    for (std::size_t i = 0; i < res.m2.size(); ++i) write_mask(ws.masks(2) / mask_name(i), res.m2[i]);
    save_poses(dense_1, ws.dense(1));
    save_poses(dense_2, ws.dense(2));
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [id, n] : det.flag_counts) counts[std::to_string(id)] = n;
    write_json(ws.detect_report(), {{"changed_ids", det.changed_ids}, {"flag_counts", counts},
                                    {"poses_1", dense_1.size()}, {"poses_2", dense_2.size()}});
    res.dense_1 = std::move(dense_1);
    res.dense_2 = std::move(dense_2);
    log << "detect: " << res.dense_1.size() << " + " << res.dense_2.size() << " densified poses, changed ids {";
    bool first = true;
    for (InstanceId id : res.changed_ids) {
        log << (first ? "" : ", ") << id;
        first = false;
    }
    log << "}\n";
    return res;
}

struct TrainStageResult {
    TrainResult trained;
    GaussianCloud partitioned;
};

inline TrainStageResult cmd_train(const PipelineConfig& c, std::ostream& log) {
    const Workspace ws = workspace(c);
    const GaussianCloud cloud = load_cloud(ws.scene());
    std::vector<Camera> cams;
    std::vector<TimeStamp> epochs;
    ChangeMaskSequence masks;
    for (int seq = 1; seq <= 2; ++seq) {
        const PoseSequence dense = load_poses(ws.dense(seq));
        const TimeStamp t = seq == 1 ? TimeStamp::before : TimeStamp::after;
        for (std::size_t i : dense.captured_indices()) {
            cams.push_back(c.camera.camera(dense[i]));
            epochs.push_back(t);
            masks.push_back(read_mask(ws.masks(seq) / mask_name(i), i, t));
        }
    }
    const RenderPack pack = build_render_pack(cloud, cams, epochs, c.threads);
    TrainStageResult res;
    res.trained = train(cloud, pack, masks, c.train);
    res.partitioned = partition_cloud(res.trained.cloud, res.trained.head, c.tau);
    save_cloud(CloudFile{res.partitioned, res.trained.head}, ws.trained());

    std::ostringstream csv;
    csv << "iteration,L1,LTV,L2d,L3d,total\n";
    for (std::size_t i = 0; i < res.trained.curve.size(); ++i) {
        const auto& l = res.trained.curve[i];
        csv << i << "," << fmt(l.l1) << "," << fmt(l.ltv) << "," << fmt(l.l2d) << "," << fmt(l.l3d) << "," << fmt(l.total) << "\n";
    }
    detail::write_file_atomic(ws.loss_csv(), csv.str());
    std::size_t n_changed = 0;
    for (auto l : res.partitioned.partition) n_changed += l == PartitionLabel::changed;
    if (!res.trained.curve.empty()) {
        log << "train: " << masks.size() << " views, L2d " << fmt(res.trained.curve.front().l2d) << " -> "
            << fmt(res.trained.curve.back().l2d) << ", " << n_changed << "/" << cloud.size() << " gaussians changed\n";
    }
    return res;
}

inline CloudFile load_trained(const Workspace& ws) {
    CloudFile f = load_cloud_file(ws.trained());
    if (!f.head) throw ValidationError(ws.trained().string() + " has no trained change head; run 'train' first");
    return f;
}

struct RenderedView {
    ChangeMask change;
    FrameBundle frame;
};

inline RenderedView render_novel(const CloudFile& trained, const Camera& cam, TimeStamp t, int threads) {
    RenderOptions opt;
    opt.record_contributions = false;
    opt.threads = threads;
    RenderedView v;
    v.frame = render_view(trained.cloud, t, cam, opt);
    v.change = change_map(change_logits(v.frame, *trained.head), 0, t);
    return v;
}

/// Renders image, change map and feature map for one arbitrary pose into `dir`.
inline RenderedView cmd_render_pose(const PipelineConfig& c, const Pose& pose, TimeStamp t, const fs::path& dir,
                                    std::ostream& log) {
    const Workspace ws = workspace(c);
    const CloudFile trained = load_trained(ws);
    RenderedView v = render_novel(trained, c.camera.camera(pose), t, c.threads);
    write_ppm(dir / (std::string("image_") + to_string(t) + ".ppm"), v.frame);
    write_mask(dir / (std::string("change_") + to_string(t) + ".pgm"), v.change);
    write_feature_map(dir / (std::string("features_") + to_string(t) + ".gsfm"), feature_map(v.frame));
    log << "render: " << v.change.count() << " changed pixels at the requested " << to_string(t) << " view\n";
    return v;
}

/// Renders predicted change maps (and ground truth, when known) at every
/// held-out evaluation pose.
inline std::size_t cmd_render_eval(const PipelineConfig& c, std::ostream& log) {
    const Workspace ws = workspace(c);
    const CloudFile trained = load_trained(ws);
    const PoseSequence eval = load_poses(ws.poses_eval());
    const bool have_gt = fs::exists(ws.ground_truth());
    const IdSet gt_ids = have_gt ? load_ground_truth(ws) : IdSet{};
    const GaussianCloud scene = have_gt ? load_cloud(ws.scene()) : GaussianCloud{};
    std::size_t written = 0;
    for (std::size_t v = 0; v < eval.size(); ++v) {
        const Camera cam = c.camera.camera(eval[v]);
        for (TimeStamp t : c.eval_epochs()) {
            const RenderedView rv = render_novel(trained, cam, t, c.threads);
            write_mask(ws.pred_dir() / view_name(v, t, "pgm"), rv.change);
            write_ppm(ws.render_dir() / "image" / view_name(v, t, "ppm"), rv.frame);
            if (have_gt) write_mask(ws.gt_dir() / view_name(v, t, "pgm"), ground_truth_mask(scene, gt_ids, t, cam, c.threads));
            ++written;
        }
    }
    log << "render: " << written << " evaluation view(s)" << (have_gt ? " with ground truth" : "") << "\n";
    return written;
}

struct EvalResult {
    MetricsSummary summary;
    std::vector<std::string> names;
    std::size_t box_matches = 0;
    std::size_t box_misses = 0;
    std::size_t box_false_alarms = 0;
};

inline std::string metrics_csv(const EvalResult& r) {
    std::ostringstream csv;
    csv << "view,precision,recall,f1,iou,tp,fp,fn\n";
    const auto row = [&](const std::string& name, const PixelMetrics& m) {
        csv << name << "," << fmt(m.precision) << "," << fmt(m.recall) << "," << fmt(m.f1) << "," << fmt(m.iou) << ","
            << m.tp << "," << m.fp << "," << m.fn << "\n";
    };
    for (std::size_t i = 0; i < r.names.size(); ++i) row(r.names[i], r.summary.per_view[i]);
    row("mean", r.summary.mean);
    row("pooled", r.summary.pooled);
    return csv.str();
}

inline void print_metrics_table(const EvalResult& r, std::ostream& log) {
    log << std::left << std::setw(22) << "view" << std::right << std::setw(9) << "P" << std::setw(9) << "R"
        << std::setw(9) << "F1" << std::setw(9) << "IoU" << "\n";
    const auto row = [&](const std::string& name, const PixelMetrics& m) {
        log << std::left << std::setw(22) << name << std::right << std::fixed << std::setprecision(4) << std::setw(9)
            << m.precision << std::setw(9) << m.recall << std::setw(9) << m.f1 << std::setw(9) << m.iou << "\n";
        log.unsetf(std::ios::fixed);
    };
    for (std::size_t i = 0; i < r.names.size(); ++i) row(r.names[i], r.summary.per_view[i]);
    row("mean", r.summary.mean);
    row("pooled", r.summary.pooled);
    log << "boxes: " << r.box_matches << " matched, " << r.box_misses << " missed, " << r.box_false_alarms
        << " false alarm(s)\n";
}

/// Compares every ground-truth mask in `gt_dir` with the same-named file in
/// `pred_dir`.
inline EvalResult cmd_eval(const PipelineConfig& c, const fs::path& pred_dir, const fs::path& gt_dir,
                           const fs::path& csv_path, std::ostream& log) {
    (void)c;
    if (!fs::is_directory(gt_dir)) throw IoError("ground-truth directory '" + gt_dir.string() + "' does not exist");
    std::vector<fs::path> gts;
    for (const auto& e : fs::directory_iterator(gt_dir)) {
        if (e.path().extension() == ".pgm") gts.push_back(e.path());
    }
    std::sort(gts.begin(), gts.end());
    EvalResult r;
    std::vector<PixelMetrics> per_view;
    for (const auto& g : gts) {
        const fs::path p = pred_dir / g.filename();
        if (!fs::exists(p)) throw IoError("missing prediction '" + p.string() + "' for ground truth '" + g.string() + "'");
        const ChangeMask gt = read_mask(g);
        const ChangeMask pred = read_mask(p);
        per_view.push_back(pixel_metrics(pred, gt));
        const MatchReport mr = match_boxes(mask_boxes(pred), mask_boxes(gt));
        r.box_matches += mr.matches.size();
        r.box_misses += mr.misses.size();
        r.box_false_alarms += mr.false_alarms.size();
        r.names.push_back(g.stem().string());
    }
    r.summary = summarize(std::move(per_view));
    detail::write_file_atomic(csv_path, metrics_csv(r));
    print_metrics_table(r, log);
    return r;
}

struct BaselineResult {
    std::vector<std::uint32_t> selected;
    MetricsSummary configured;
    std::vector<std::pair<DeltaThresholds, MetricsSummary>> grid;
    double best_grid_f1 = 0.0;
};

inline const std::vector<double>& baseline_grid_positions() {
    static const std::vector<double> v{0.01, 0.03, 0.1, 0.3, 1.0};
    return v;
}

inline const std::vector<double>& baseline_grid_rotations() {
    static const std::vector<double> v{0.01, 0.03, 0.1, 0.3, 1.0};
    return v;
}

/// Delta-threshold baseline at the evaluation views: the configured
/// thresholds plus a 5x5 sweep.
inline BaselineResult cmd_baseline(const PipelineConfig& c, std::ostream& log) {
    const Workspace ws = workspace(c);
    const GaussianCloud cloud = load_cloud(ws.scene());
    const PoseSequence eval = load_poses(ws.poses_eval());
    const bool have_gt = fs::exists(ws.ground_truth());
    const IdSet gt_ids = have_gt ? load_ground_truth(ws) : IdSet{};

    std::vector<ChangeMask> gts;
    std::vector<std::pair<Camera, TimeStamp>> views;
    for (std::size_t v = 0; v < eval.size(); ++v) {
        for (TimeStamp t : c.eval_epochs()) {
            const Camera cam = c.camera.camera(eval[v]);
            views.emplace_back(cam, t);
            if (have_gt) gts.push_back(ground_truth_mask(cloud, gt_ids, t, cam, c.threads));
        }
    }
    const auto score = [&](const std::vector<std::uint32_t>& sel, const fs::path* out_dir) {
        std::vector<PixelMetrics> per;
        for (std::size_t k = 0; k < views.size(); ++k) {
            const ChangeMask m = render_baseline_change_map(cloud, sel, views[k].second, views[k].first, c.threads);
            if (out_dir) write_mask(*out_dir / view_name(k / c.eval_epochs().size(), views[k].second, "pgm"), m);
            if (have_gt) per.push_back(pixel_metrics(m, gts[k]));
        }
        return summarize(std::move(per));
    };

    BaselineResult res;
    res.selected = filter_by_delta(cloud, c.baseline);
    const fs::path mask_dir = ws.baseline_dir() / "masks";
    res.configured = score(res.selected, &mask_dir);

    std::ostringstream grid_csv;
    grid_csv << "pos_thresh,rot_thresh,scale_thresh,selected,precision,recall,f1,iou\n";
    for (const DeltaThresholds& th : threshold_grid(baseline_grid_positions(), baseline_grid_rotations())) {
        const auto sel = filter_by_delta(cloud, th);
        MetricsSummary s = score(sel, nullptr);
        res.best_grid_f1 = std::max(res.best_grid_f1, s.mean.f1);
        grid_csv << fmt(th.pos_thresh) << "," << fmt(th.rot_thresh) << "," << fmt(th.scale_thresh) << "," << sel.size()
                 << "," << fmt(s.mean.precision) << "," << fmt(s.mean.recall) << "," << fmt(s.mean.f1) << ","
                 << fmt(s.mean.iou) << "\n";
        res.grid.emplace_back(th, std::move(s));
    }
    if (have_gt) {
        EvalResult er;
        er.summary = res.configured;
        for (std::size_t k = 0; k < views.size(); ++k) er.names.push_back(view_name(k / c.eval_epochs().size(), views[k].second, "pgm"));
        for (auto& n : er.names) n = fs::path(n).stem().string();
        detail::write_file_atomic(ws.baseline_dir() / "metrics.csv", metrics_csv(er));
        detail::write_file_atomic(ws.baseline_dir() / "grid.csv", grid_csv.str());
        log << "baseline: " << res.selected.size() << " gaussians selected, mean F1 " << fmt(res.configured.mean.f1)
            << ", best grid F1 " << fmt(res.best_grid_f1) << "\n";
    } else {
        log << "baseline: " << res.selected.size() << " gaussians selected (no ground truth to score)\n";
    }
    return res;
}

/// generate -> detect -> train -> render -> eval.
struct PipelineRun {
    GenerateResult generated;
    DetectResult detected;
    TrainStageResult trained;
    EvalResult evaluated;
};

inline PipelineRun run_pipeline(const PipelineConfig& c, std::ostream& log) {
    PipelineRun run;
    run.generated = cmd_generate(c, log);
    run.detected = cmd_detect(c, log);
    run.trained = cmd_train(c, log);
    cmd_render_eval(c, log);
    const Workspace ws = workspace(c);
    run.evaluated = cmd_eval(c, ws.pred_dir(), ws.gt_dir(), ws.metrics_csv(), log);
    return run;
}

} // namespace gsdiff
