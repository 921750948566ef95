// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsdiff/detail/parallel.hpp"
#include "gsdiff/error.hpp"
#include "gsdiff/frames.hpp"
#include "gsdiff/image_io.hpp"
#include "gsdiff/raster.hpp"

namespace gsdiff {

using IdSet = std::set<InstanceId>;

/// Synthetic stand-in for a zero-shot segmenter and tracker: takes the
/// rasterizer's dominant-Gaussian instance ids and drops speckles smaller
/// than `min_pixels`.
inline InstanceFrame oracle_segment(const FrameBundle& bundle, int min_pixels, std::size_t pose_index = 0,
                                    TimeStamp epoch = TimeStamp::before) {
    if (bundle.id_map.size() != bundle.pixel_count()) throw ContractViolation("frame bundle has no id map");
    InstanceFrame f{bundle.width, bundle.height, bundle.id_map, pose_index, epoch};
    std::unordered_map<InstanceId, int> area;
    for (InstanceId id : f.id_map) ++area[id];
    for (InstanceId& id : f.id_map) {
        if (id != 0 && area[id] < min_pixels) id = 0;
    }
    return f;
}

inline IdSet instance_ids(const InstanceFrame& f) {
    IdSet ids;
    for (InstanceId id : f.id_map) {
        if (id != 0) ids.insert(id);
    }
    return ids;
}

struct DiffOptions {
    /// Also flag ids present in both frames whose pixel sets overlap with IoU
    /// below `iou_threshold` (moved but consistently tracked instances).
    bool flag_low_iou = false;
    double iou_threshold = 0.7;
};

struct DiffResult {
    IdSet changed_ids;
    ChangeMask before;
    ChangeMask after;
};

inline ChangeMask mask_of_ids(const InstanceFrame& f, const IdSet& ids) {
    ChangeMask m = ChangeMask::empty(f.width, f.height, f.pose_index, f.epoch);
    if (ids.empty()) return m;
    for (std::size_t i = 0; i < f.id_map.size(); ++i) m.mask[i] = f.id_map[i] != 0 && ids.count(f.id_map[i]) != 0;
    return m;
}

/// Changed ids of one co-posed frame pair: the symmetric difference of their
/// non-background id sets, plus optionally low-overlap shared ids.
inline DiffResult diff_ids(const InstanceFrame& before, const InstanceFrame& after, const DiffOptions& opt = {}) {
    if (before.pose_index != after.pose_index) {
        throw ContractViolation("diff_ids needs co-posed frames (pose " + std::to_string(before.pose_index) + " vs " +
                                std::to_string(after.pose_index) + ")");
    }
    if (before.width != after.width || before.height != after.height || before.id_map.size() != after.id_map.size()) {
        throw ContractViolation("diff_ids frames differ in size");
    }
    const IdSet a = instance_ids(before);
    const IdSet b = instance_ids(after);
    DiffResult r;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(),
                                  std::inserter(r.changed_ids, r.changed_ids.end()));
    if (opt.flag_low_iou) {
        std::map<InstanceId, std::size_t> inter, uni;
        for (std::size_t i = 0; i < before.id_map.size(); ++i) {
            const InstanceId x = before.id_map[i];
            const InstanceId y = after.id_map[i];
            if (x != 0) ++uni[x];
            if (y != 0 && y != x) ++uni[y];
            if (x != 0 && x == y) ++inter[x];
        }
        for (InstanceId id : a) {
            if (!b.count(id)) continue;
            const double iou = static_cast<double>(inter[id]) / static_cast<double>(uni[id]);
            if (iou < opt.iou_threshold) r.changed_ids.insert(id);
        }
    }
    r.before = mask_of_ids(before, r.changed_ids);
    r.after = mask_of_ids(after, r.changed_ids);
    return r;
}

struct DetectOptions {
    DiffOptions diff;
    /// Ids flagged in fewer pose pairs than this are treated as tracker flicker.
    int persist_k = 3;
    int threads = 1;
};

struct DetectionResult {
    ChangeMaskSequence before_masks; // one per pose, before epoch
    ChangeMaskSequence after_masks;  // one per pose, after epoch
    IdSet changed_ids;               // ids surviving the persistence filter
    std::map<InstanceId, int> flag_counts;
};

/// Runs diff_ids over pose-aligned frame lists and suppresses ids that are
/// flagged in fewer than `persist_k` pose pairs.
inline DetectionResult detect_sequence(const std::vector<InstanceFrame>& before, const std::vector<InstanceFrame>& after,
                                       const DetectOptions& opt = {}) {
    if (before.size() != after.size()) {
        throw ContractViolation("detect_sequence needs equally long frame lists (" + std::to_string(before.size()) +
                                " vs " + std::to_string(after.size()) + ")");
    }
    std::vector<IdSet> per_pose(before.size());
    detail::parallel_for(before.size(), opt.threads, [&](std::size_t i) {
        per_pose[i] = diff_ids(before[i], after[i], opt.diff).changed_ids;
    });

    DetectionResult r;
    for (const auto& ids : per_pose)
        for (InstanceId id : ids) ++r.flag_counts[id];
    for (const auto& [id, n] : r.flag_counts) {
        if (n >= opt.persist_k) r.changed_ids.insert(id);
    }

    r.before_masks.resize(before.size());
    r.after_masks.resize(before.size());
    detail::parallel_for(before.size(), opt.threads, [&](std::size_t i) {
        IdSet kept;
        std::set_intersection(per_pose[i].begin(), per_pose[i].end(), r.changed_ids.begin(), r.changed_ids.end(),
                              std::inserter(kept, kept.end()));
        r.before_masks[i] = mask_of_ids(before[i], kept);
        r.after_masks[i] = mask_of_ids(after[i], kept);
    });
    return r;
}

// --- externally produced masks ---------------------------------------------

struct IngestExpectation {
    std::size_t pose_count = 0; // valid pose_index range is [0, pose_count)
    int width = 0;              // 0 = take from the first file
    int height = 0;
};

/// Loads 16-bit PGM id maps listed in a manifest
/// `{files: [{path, pose_index, epoch}], id_space: "consistent"}`.
/// Frames come back sorted by (epoch, pose_index).
inline std::vector<InstanceFrame> ingest_masks(const std::filesystem::path& dir, const nlohmann::json& manifest,
                                               const IngestExpectation& expect) {
    if (!manifest.is_object() || !manifest.contains("files") || !manifest.at("files").is_array()) {
        throw ValidationError("manifest needs a 'files' list");
    }
    if (manifest.value("id_space", std::string()) != "consistent") {
        throw ValidationError("manifest must declare id_space \"consistent\"");
    }
    std::vector<InstanceFrame> frames;
    std::set<std::pair<int, std::size_t>> seen;
    int width = expect.width;
    int height = expect.height;
    for (const auto& entry : manifest.at("files")) {
        std::string rel;
        long long pose = -1;
        TimeStamp epoch{};
        try {
            rel = entry.at("path").get<std::string>();
            pose = entry.at("pose_index").get<long long>();
            epoch = parse_timestamp(entry.at("epoch").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("malformed manifest entry: ") + e.what());
        }
        if (pose < 0 || static_cast<std::size_t>(pose) >= expect.pose_count) {
            throw ValidationError("manifest entry '" + rel + "' references pose_index " + std::to_string(pose) +
                                  " but only " + std::to_string(expect.pose_count) + " poses exist");
        }
        if (!seen.insert({static_cast<int>(epoch), static_cast<std::size_t>(pose)}).second) {
            throw ValidationError("duplicate pose_index " + std::to_string(pose) + " for epoch " + to_string(epoch));
        }
        const std::filesystem::path file = dir / rel;
        if (!std::filesystem::exists(file)) throw IoError("mask file '" + file.string() + "' does not exist");
        const Image16 img = read_pgm(file);
        if (width == 0) {
            width = img.width;
            height = img.height;
        }
        if (img.width != width || img.height != height) {
            throw ValidationError("mask file '" + file.string() + "' is " + std::to_string(img.width) + "x" +
                                  std::to_string(img.height) + ", expected " + std::to_string(width) + "x" +
                                  std::to_string(height));
        }
        InstanceFrame f{img.width, img.height, {}, static_cast<std::size_t>(pose), epoch};
        f.id_map.assign(img.pixels.begin(), img.pixels.end());
        frames.push_back(std::move(f));
    }
    std::sort(frames.begin(), frames.end(), [](const InstanceFrame& a, const InstanceFrame& b) {
        return a.epoch != b.epoch ? a.epoch < b.epoch : a.pose_index < b.pose_index;
    });
    return frames;
}

inline std::vector<InstanceFrame> ingest_masks(const std::filesystem::path& dir, const std::filesystem::path& manifest_path,
                                               const IngestExpectation& expect) {
    const auto buf = detail::read_file(manifest_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.begin(), buf.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(manifest_path.string() + ": " + e.what(), e.byte);
    }
    return ingest_masks(dir, j, expect);
}

} // namespace gsdiff
