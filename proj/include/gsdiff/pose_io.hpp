// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "gsdiff/detail/bytes.hpp"
#include "gsdiff/pose.hpp"

namespace gsdiff {

// Pose file: JSON list of {q: [w,x,y,z], t: [x,y,z], epoch: "before"|"after"}.
// Interpolated poses additionally carry {interpolated: true, delta: d}.

inline nlohmann::json poses_to_json(const PoseSequence& seq) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Pose& p : seq.poses) {
        nlohmann::json r = {{"q", {p.rotation.w, p.rotation.x, p.rotation.y, p.rotation.z}},
                            {"t", {p.translation.x(), p.translation.y(), p.translation.z()}},
                            {"epoch", to_string(p.epoch)}};
        if (p.source == PoseSource::interpolated) {
            r["interpolated"] = true;
            r["delta"] = p.delta;
        }
        arr.push_back(r);
    }
    return arr;
}

inline PoseSequence poses_from_json(const nlohmann::json& arr) {
    if (!arr.is_array()) throw ValidationError("pose file must hold a JSON list");
    PoseSequence seq;
    try {
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto& r = arr[i];
            const auto& q = r.at("q");
            const auto& t = r.at("t");
            if (q.size() != 4 || t.size() != 3) throw ValidationError("pose " + std::to_string(i) + ": q needs 4 and t needs 3 entries");
            Pose p;
            p.rotation = Quat{q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>()};
            if (std::abs(p.rotation.norm() - 1.0) > 1e-9) {
                throw ValidationError("pose " + std::to_string(i) + ": rotation is not unit norm");
            }
            p.translation = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
            p.epoch = parse_timestamp(r.at("epoch").get<std::string>());
            if (r.value("interpolated", false)) {
                p.source = PoseSource::interpolated;
                p.delta = r.value("delta", 0.0);
            }
            seq.poses.push_back(p);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed pose record: ") + e.what());
    }
    if (!seq.poses.empty()) {
        const TimeStamp first = seq.poses.front().epoch;
        bool uniform = true;
        for (const auto& p : seq.poses) uniform = uniform && p.epoch == first;
        if (uniform) seq.epoch = first;
    }
    return seq;
}

inline void save_poses(const PoseSequence& seq, const std::filesystem::path& path) {
    detail::write_file_atomic(path, poses_to_json(seq).dump(1));
}

inline PoseSequence load_poses(const std::filesystem::path& path) {
    const auto buf = detail::read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.begin(), buf.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), e.byte);
    }
    return poses_from_json(j);
}

} // namespace gsdiff
