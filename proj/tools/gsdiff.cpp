// SPDX-License-Identifier: Apache-2.0
//
// Command line driver for the change detection pipeline:
//
//   gsdiff generate | detect | train | render | eval | baseline | run
//
// Global flags: --config PATH, --threads N, --seed N, --set key=value (repeatable).
// GSDIFF_OUT overrides the output directory.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gsdiff/gsdiff.hpp"

namespace {

int exit_code(gsdiff::ErrorCategory c) {
    switch (c) {
    case gsdiff::ErrorCategory::validation:
    case gsdiff::ErrorCategory::configuration: return 2;
    case gsdiff::ErrorCategory::parse:
    case gsdiff::ErrorCategory::version:
    case gsdiff::ErrorCategory::io: return 3;
    case gsdiff::ErrorCategory::contract: return 4;
    case gsdiff::ErrorCategory::divergence: return 5;
    }
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Instance-level 3D change detection on deformable Gaussian scenes"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    int threads = 0;
    long long seed = -1;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "TOML-style configuration file")->check(CLI::ExistingFile);
    app.add_option("--threads", threads, "worker threads (output does not depend on this)")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "random seed")->check(CLI::NonNegativeNumber);
    app.add_option("--set", overrides, "override a configuration key, key=value")->allow_extra_args(false);

    auto* generate = app.add_subcommand("generate", "write the scene, capture poses and ground truth");
    auto* detect = app.add_subcommand("detect", "densify poses, segment, and diff instance ids into change masks");
    auto* train = app.add_subcommand("train", "learn classification encodings and the change head");
    auto* render = app.add_subcommand("render", "render change maps (evaluation views, or one --pose)");
    std::string pose_file;
    std::size_t pose_index = 0;
    std::string epoch = "before";
    std::string render_dir;
    render->add_option("--pose", pose_file, "pose JSON file; renders a single novel view")->check(CLI::ExistingFile);
    render->add_option("--index", pose_index, "record to use from the pose file");
    render->add_option("--epoch", epoch, "before or after")->check(CLI::IsMember({"before", "after"}));
    render->add_option("--out-dir", render_dir, "directory for single-view outputs");
    auto* eval = app.add_subcommand("eval", "pixel and box metrics of predicted vs ground-truth masks");
    std::string pred_dir, gt_dir, csv_path;
    eval->add_option("--pred", pred_dir, "predicted mask directory");
    eval->add_option("--gt", gt_dir, "ground-truth mask directory");
    eval->add_option("--csv", csv_path, "metrics CSV path");
    auto* baseline = app.add_subcommand("baseline", "delta-threshold baseline masks and metrics");
    auto* run = app.add_subcommand("run", "generate, detect, train, render and eval in one go");

    CLI11_PARSE(app, argc, argv);

    try {
        gsdiff::KeyValueConfig kv = config_path.empty() ? gsdiff::KeyValueConfig{} : gsdiff::KeyValueConfig::load(config_path);
        for (const auto& o : overrides) kv.set(o);
        if (threads > 0) kv.set("threads", std::to_string(threads));
        if (seed >= 0) kv.set("seed", std::to_string(seed));
        const gsdiff::PipelineConfig cfg = gsdiff::pipeline_config(kv);
        const gsdiff::Workspace ws = gsdiff::workspace(cfg);
        std::ostream& log = std::cout;

        if (generate->parsed()) {
            gsdiff::cmd_generate(cfg, log);
        } else if (detect->parsed()) {
            gsdiff::cmd_detect(cfg, log);
        } else if (train->parsed()) {
            gsdiff::cmd_train(cfg, log);
        } else if (render->parsed()) {
            if (pose_file.empty()) {
                gsdiff::cmd_render_eval(cfg, log);
            } else {
                const gsdiff::PoseSequence poses = gsdiff::load_poses(pose_file);
                if (pose_index >= poses.size()) {
                    throw gsdiff::ValidationError("--index " + std::to_string(pose_index) + " but the pose file has " +
                                                  std::to_string(poses.size()) + " record(s)");
                }
                const std::filesystem::path dir = render_dir.empty() ? ws.render_dir() / "novel" : std::filesystem::path(render_dir);
                gsdiff::cmd_render_pose(cfg, poses[pose_index], gsdiff::parse_timestamp(epoch), dir, log);
            }
        } else if (eval->parsed()) {
            gsdiff::cmd_eval(cfg, pred_dir.empty() ? ws.pred_dir() : std::filesystem::path(pred_dir),
                             gt_dir.empty() ? ws.gt_dir() : std::filesystem::path(gt_dir),
                             csv_path.empty() ? ws.metrics_csv() : std::filesystem::path(csv_path), log);
        } else if (baseline->parsed()) {
            gsdiff::cmd_baseline(cfg, log);
        } else if (run->parsed()) {
            gsdiff::run_pipeline(cfg, log);
        }
    } catch (const gsdiff::Error& e) {
        std::cerr << "error [" << gsdiff::to_string(e.category()) << "]: " << e.what() << "\n";
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
