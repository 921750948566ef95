// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cctype>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "gsdiff/change_head.hpp"
#include "gsdiff/detail/bytes.hpp"
#include "gsdiff/error.hpp"
#include "gsdiff/scene.hpp"

namespace gsdiff {

// Binary cloud container, all values little endian:
//
//   "GSDF"  u32 version  u64 count
//   count x { f64[3] position, f64[3] scale, f64[4] rotation (w,x,y,z),
//             f64 opacity, f64[3] color, u32 instance_id, f64[16] encoding }
//   2 x delta table (before, after):
//       u8 present, then if present count x { f64[3] d_position,
//       f64[4] d_rotation (w,x,y,z), f64[3] d_scale (log space) }
//   count x u8 partition (0 unassigned, 1 unchanged, 2 changed)
//   version 2 only: f64[2][16] head weights (row major), f64[2] head bias
inline constexpr char kCloudMagic[] = "GSDF";
inline constexpr std::uint32_t kCloudVersionPlain = 1;
inline constexpr std::uint32_t kCloudVersionTrained = 2;

struct CloudFile {
    GaussianCloud cloud;
    std::optional<ChangeHead> head;

    bool operator==(const CloudFile&) const = default;
};

namespace detail {

inline void put_vec(ByteWriter& w, const Vec3& v) {
    w.f64(v.x());
    w.f64(v.y());
    w.f64(v.z());
}

inline void put_quat(ByteWriter& w, const Quat& q) {
    w.f64(q.w);
    w.f64(q.x);
    w.f64(q.y);
    w.f64(q.z);
}

inline Vec3 get_vec(ByteReader& r, const char* what) {
    Vec3 v;
    v.x() = r.f64(what);
    v.y() = r.f64(what);
    v.z() = r.f64(what);
    return v;
}

inline Quat get_quat(ByteReader& r, const char* what) {
    Quat q;
    q.w = r.f64(what);
    q.x = r.f64(what);
    q.y = r.f64(what);
    q.z = r.f64(what);
    return q;
}

inline const char* label_name(PartitionLabel l) {
    switch (l) {
    case PartitionLabel::unchanged: return "unchanged";
    case PartitionLabel::changed: return "changed";
    default: return "unassigned";
    }
}

inline PartitionLabel parse_label(const std::string& s) {
    if (s == "unchanged") return PartitionLabel::unchanged;
    if (s == "changed") return PartitionLabel::changed;
    if (s == "unassigned") return PartitionLabel::unassigned;
    throw ValidationError("unknown partition label '" + s + "'");
}

} // namespace detail

inline std::vector<char> encode_cloud(const CloudFile& file) {
    const GaussianCloud& c = file.cloud;
    validate(c);
    detail::ByteWriter w;
    w.bytes(std::string_view(kCloudMagic, 4));
    w.u32(file.head ? kCloudVersionTrained : kCloudVersionPlain);
    w.u64(c.size());
    for (const Gaussian& g : c.gaussians) {
        detail::put_vec(w, g.position);
        detail::put_vec(w, g.scale);
        detail::put_quat(w, g.rotation);
        w.f64(g.opacity);
        detail::put_vec(w, g.color);
        w.u32(g.instance_id);
        for (int k = 0; k < kEncodingDim; ++k) w.f64(g.encoding[k]);
    }
    for (TimeStamp t : kEpochs) {
        const auto& table = c.deltas[static_cast<std::size_t>(t)];
        w.u8(table ? 1 : 0);
        if (!table) continue;
        for (const DeformationDelta& d : *table) {
            detail::put_vec(w, d.d_position);
            detail::put_quat(w, d.d_rotation);
            detail::put_vec(w, d.d_log_scale);
        }
    }
    for (PartitionLabel l : c.partition) w.u8(static_cast<std::uint8_t>(l));
    if (file.head) {
        for (int r = 0; r < 2; ++r)
            for (int k = 0; k < kEncodingDim; ++k) w.f64(file.head->weights(r, k));
        w.f64(file.head->bias[0]);
        w.f64(file.head->bias[1]);
    }
    return w.data();
}

inline CloudFile decode_cloud_binary(const std::vector<char>& buf) {
    detail::ByteReader r(buf);
    if (r.bytes(4, "magic") != std::string_view(kCloudMagic, 4)) throw ParseError("bad magic, not a GSDF container", 0);
    const std::uint32_t version = r.u32("version");
    if (version < kCloudVersionPlain || version > kCloudVersionTrained) throw VersionError(version, kCloudVersionTrained);
    const std::uint64_t count = r.u64("count");
    constexpr std::size_t kRecordBytes = 8 * (3 + 3 + 4 + 1 + 3) + 4 + 8 * kEncodingDim;
    if (count > r.remaining() / kRecordBytes) throw ParseError("gaussian count exceeds file size", r.offset() - 8);

    CloudFile out;
    GaussianCloud& c = out.cloud;
    c.gaussians.resize(count);
    for (Gaussian& g : c.gaussians) {
        g.position = detail::get_vec(r, "position");
        g.scale = detail::get_vec(r, "scale");
        g.rotation = detail::get_quat(r, "rotation");
        g.opacity = r.f64("opacity");
        g.color = detail::get_vec(r, "color");
        g.instance_id = r.u32("instance_id");
        for (int k = 0; k < kEncodingDim; ++k) g.encoding[k] = r.f64("encoding");
    }
    for (TimeStamp t : kEpochs) {
        const std::size_t at = r.offset();
        const std::uint8_t present = r.u8("delta table flag");
        if (present > 1) throw ParseError("invalid delta table flag", at);
        if (!present) continue;
        DeltaTable table(count);
        for (DeformationDelta& d : table) {
            d.d_position = detail::get_vec(r, "d_position");
            d.d_rotation = detail::get_quat(r, "d_rotation");
            d.d_log_scale = detail::get_vec(r, "d_scale");
        }
        c.deltas[static_cast<std::size_t>(t)] = std::move(table);
    }
    c.partition.resize(count);
    for (PartitionLabel& l : c.partition) {
        const std::size_t at = r.offset();
        const std::uint8_t v = r.u8("partition label");
        if (v > 2) throw ParseError("invalid partition label", at);
        l = static_cast<PartitionLabel>(v);
    }
    if (version == kCloudVersionTrained) {
        ChangeHead h;
        for (int row = 0; row < 2; ++row)
            for (int k = 0; k < kEncodingDim; ++k) h.weights(row, k) = r.f64("head weights");
        h.bias[0] = r.f64("head bias");
        h.bias[1] = r.f64("head bias");
        out.head = h;
    }
    if (r.remaining() != 0) throw ParseError("trailing bytes after container", r.offset());
    validate(c);
    return out;
}

// --- JSON variant for hand-authored fixtures -------------------------------

inline nlohmann::json to_json(const CloudFile& file) {
    using nlohmann::json;
    const auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
    const auto quat = [](const Quat& q) { return json::array({q.w, q.x, q.y, q.z}); };
    json j;
    j["format"] = "GSDF";
    j["version"] = file.head ? kCloudVersionTrained : kCloudVersionPlain;
    json gs = json::array();
    for (const Gaussian& g : file.cloud.gaussians) {
        json e = json::array();
        for (int k = 0; k < kEncodingDim; ++k) e.push_back(g.encoding[k]);
        gs.push_back({{"position", vec(g.position)}, {"scale", vec(g.scale)}, {"rotation", quat(g.rotation)},
                      {"opacity", g.opacity}, {"color", vec(g.color)}, {"instance_id", g.instance_id},
                      {"encoding", e}});
    }
    j["gaussians"] = gs;
    json deltas = json::object();
    for (TimeStamp t : kEpochs) {
        const auto& table = file.cloud.deltas[static_cast<std::size_t>(t)];
        if (!table) continue;
        json rows = json::array();
        for (const auto& d : *table) {
            rows.push_back({{"d_position", vec(d.d_position)}, {"d_rotation", quat(d.d_rotation)},
                            {"d_scale", vec(d.d_log_scale)}});
        }
        deltas[to_string(t)] = rows;
    }
    j["deltas"] = deltas;
    json labels = json::array();
    for (PartitionLabel l : file.cloud.partition) labels.push_back(detail::label_name(l));
    j["partition"] = labels;
    if (file.head) {
        json w = json::array();
        for (int r = 0; r < 2; ++r) {
            json row = json::array();
            for (int k = 0; k < kEncodingDim; ++k) row.push_back(file.head->weights(r, k));
            w.push_back(row);
        }
        j["head"] = {{"weights", w}, {"bias", {file.head->bias[0], file.head->bias[1]}}};
    }
    return j;
}

inline CloudFile cloud_from_json(const nlohmann::json& j) {
    const auto vec = [](const nlohmann::json& a, const char* what) {
        if (!a.is_array() || a.size() != 3) throw ValidationError(std::string(what) + " must be a 3-array");
        return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
    };
    const auto quat = [](const nlohmann::json& a, const char* what) {
        if (!a.is_array() || a.size() != 4) throw ValidationError(std::string(what) + " must be a 4-array [w,x,y,z]");
        return Quat{a[0].get<double>(), a[1].get<double>(), a[2].get<double>(), a[3].get<double>()};
    };
    try {
        if (j.contains("version")) {
            const auto v = j.at("version").get<std::uint32_t>();
            if (v < kCloudVersionPlain || v > kCloudVersionTrained) throw VersionError(v, kCloudVersionTrained);
        }
        std::vector<Gaussian> gs;
        for (const auto& e : j.at("gaussians")) {
            Gaussian g;
            g.position = vec(e.at("position"), "position");
            g.scale = vec(e.at("scale"), "scale");
            g.rotation = e.contains("rotation") ? quat(e.at("rotation"), "rotation") : Quat::identity();
            g.opacity = e.at("opacity").get<double>();
            g.color = vec(e.at("color"), "color");
            g.instance_id = e.value("instance_id", 0u);
            if (e.contains("encoding")) {
                const auto& enc = e.at("encoding");
                if (!enc.is_array() || enc.size() != kEncodingDim) throw ValidationError("encoding must have 16 entries");
                for (int k = 0; k < kEncodingDim; ++k) g.encoding[k] = enc[static_cast<std::size_t>(k)].get<double>();
            }
            gs.push_back(g);
        }
        CloudFile out;
        out.cloud = GaussianCloud::with_gaussians(std::move(gs));
        if (j.contains("deltas")) {
            for (TimeStamp t : kEpochs) {
                auto& slot = out.cloud.deltas[static_cast<std::size_t>(t)];
                if (!j.at("deltas").contains(to_string(t))) {
                    slot.reset();
                    continue;
                }
                DeltaTable table;
                for (const auto& d : j.at("deltas").at(to_string(t))) {
                    DeformationDelta dd;
                    if (d.contains("d_position")) dd.d_position = vec(d.at("d_position"), "d_position");
                    if (d.contains("d_rotation")) dd.d_rotation = quat(d.at("d_rotation"), "d_rotation");
                    if (d.contains("d_scale")) dd.d_log_scale = vec(d.at("d_scale"), "d_scale");
                    table.push_back(dd);
                }
                slot = std::move(table);
            }
        }
        if (j.contains("partition")) {
            out.cloud.partition.clear();
            for (const auto& l : j.at("partition")) out.cloud.partition.push_back(detail::parse_label(l.get<std::string>()));
        }
        if (j.contains("head")) {
            ChangeHead h;
            const auto& w = j.at("head").at("weights");
            for (int r = 0; r < 2; ++r)
                for (int k = 0; k < kEncodingDim; ++k)
                    h.weights(r, k) = w.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(k)).get<double>();
            h.bias[0] = j.at("head").at("bias").at(0).get<double>();
            h.bias[1] = j.at("head").at("bias").at(1).get<double>();
            out.head = h;
        }
        validate(out.cloud);
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed cloud JSON: ") + e.what());
    }
}

inline CloudFile decode_cloud(const std::vector<char>& buf) {
    std::size_t i = 0;
    while (i < buf.size() && std::isspace(static_cast<unsigned char>(buf[i]))) ++i;
    if (i < buf.size() && buf[i] == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(buf.begin(), buf.end());
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("invalid cloud JSON: ") + e.what(), e.byte);
        }
        return cloud_from_json(j);
    }
    return decode_cloud_binary(buf);
}

inline void save_cloud(const CloudFile& file, const std::filesystem::path& path) {
    detail::write_file_atomic(path, encode_cloud(file));
}

inline void save_cloud(const GaussianCloud& cloud, const std::filesystem::path& path) {
    save_cloud(CloudFile{cloud, std::nullopt}, path);
}

inline void save_cloud_json(const CloudFile& file, const std::filesystem::path& path) {
    detail::write_file_atomic(path, to_json(file).dump(2));
}

inline CloudFile load_cloud_file(const std::filesystem::path& path) { return decode_cloud(detail::read_file(path)); }

inline GaussianCloud load_cloud(const std::filesystem::path& path) { return load_cloud_file(path).cloud; }

} // namespace gsdiff
