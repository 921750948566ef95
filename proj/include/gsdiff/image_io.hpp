// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gsdiff/detail/bytes.hpp"
#include "gsdiff/error.hpp"
#include "gsdiff/frames.hpp"
#include "gsdiff/math.hpp"
#include "gsdiff/raster.hpp"

namespace gsdiff {

struct Image16 {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> pixels;

    bool operator==(const Image16&) const = default;
};

inline constexpr std::uint16_t kMaskOn = 65535;

namespace detail {

inline std::string pnm_header(const char* magic, int w, int h, int maxval) {
    return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
}

// Reads one whitespace-delimited header integer, skipping '#' comments.
inline long pnm_int(const std::vector<char>& buf, std::size_t& pos) {
    for (;;) {
        while (pos < buf.size() && std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
        if (pos < buf.size() && buf[pos] == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    const std::size_t start = pos;
    long v = 0;
    while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
        v = v * 10 + (buf[pos] - '0');
        if (v > 1'000'000) throw ParseError("PNM header value too large", start);
        ++pos;
    }
    if (pos == start) throw ParseError("expected integer in PNM header", start);
    return v;
}

} // namespace detail

/// 16-bit binary PGM (P5, maxval 65535, big-endian samples).
inline std::vector<char> encode_pgm16(const Image16& img) {
    std::string head = detail::pnm_header("P5", img.width, img.height, 65535);
    std::vector<char> out(head.begin(), head.end());
    out.reserve(out.size() + 2 * img.pixels.size());
    for (std::uint16_t v : img.pixels) {
        out.push_back(static_cast<char>(v >> 8));
        out.push_back(static_cast<char>(v & 0xFF));
    }
    return out;
}

inline Image16 decode_pgm(const std::vector<char>& buf) {
    if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '5') throw ParseError("not a binary PGM (P5)", 0);
    std::size_t pos = 2;
    Image16 img;
    img.width = static_cast<int>(detail::pnm_int(buf, pos));
    img.height = static_cast<int>(detail::pnm_int(buf, pos));
    const long maxval = detail::pnm_int(buf, pos);
    if (img.width <= 0 || img.height <= 0) throw ParseError("PGM dimensions must be positive", pos);
    if (maxval < 1 || maxval > 65535) throw ParseError("PGM maxval out of range", pos);
    if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos]))) throw ParseError("bad PGM header", pos);
    ++pos;
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    const std::size_t bps = maxval > 255 ? 2 : 1;
    if (buf.size() - pos < n * bps) throw ParseError("truncated PGM raster", buf.size());
    img.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto b0 = static_cast<unsigned char>(buf[pos + bps * i]);
        if (bps == 2) {
            const auto b1 = static_cast<unsigned char>(buf[pos + 2 * i + 1]);
            img.pixels[i] = static_cast<std::uint16_t>((b0 << 8) | b1);
        } else {
            img.pixels[i] = b0;
        }
    }
    return img;
}

inline void write_pgm16(const std::filesystem::path& path, const Image16& img) {
    detail::write_file_atomic(path, encode_pgm16(img));
}

inline Image16 read_pgm(const std::filesystem::path& path) {
    try {
        return decode_pgm(detail::read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.offset());
    }
}

inline Image16 mask_to_image(const ChangeMask& m) {
    Image16 img{m.width, m.height, std::vector<std::uint16_t>(m.mask.size())};
    for (std::size_t i = 0; i < m.mask.size(); ++i) img.pixels[i] = m.mask[i] ? kMaskOn : 0;
    return img;
}

/// Any non-zero sample counts as set.
inline ChangeMask image_to_mask(const Image16& img, std::size_t pose_index = 0, TimeStamp epoch = TimeStamp::before) {
    ChangeMask m = ChangeMask::empty(img.width, img.height, pose_index, epoch);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) m.mask[i] = img.pixels[i] != 0;
    return m;
}

inline void write_mask(const std::filesystem::path& path, const ChangeMask& m) { write_pgm16(path, mask_to_image(m)); }

inline ChangeMask read_mask(const std::filesystem::path& path, std::size_t pose_index = 0,
                            TimeStamp epoch = TimeStamp::before) {
    return image_to_mask(read_pgm(path), pose_index, epoch);
}

inline Image16 id_map_image(const InstanceFrame& f) {
    Image16 img{f.width, f.height, std::vector<std::uint16_t>(f.id_map.size())};
    for (std::size_t i = 0; i < f.id_map.size(); ++i) {
        if (f.id_map[i] > 65535) throw ValidationError("instance id does not fit a 16-bit PGM");
        img.pixels[i] = static_cast<std::uint16_t>(f.id_map[i]);
    }
    return img;
}

/// 8-bit binary PPM of the composited color.
inline std::vector<char> encode_ppm(const FrameBundle& fb) {
    std::string head = detail::pnm_header("P6", fb.width, fb.height, 255);
    std::vector<char> out(head.begin(), head.end());
    for (double v : fb.color) {
        const long q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
        out.push_back(static_cast<char>(static_cast<unsigned char>(q)));
    }
    return out;
}

inline void write_ppm(const std::filesystem::path& path, const FrameBundle& fb) {
    detail::write_file_atomic(path, encode_ppm(fb));
}

// Feature map container: "GSFM", u32 version, u32 channels, u32 height,
// u32 width, then channels planes of height*width f32, little endian.
inline constexpr std::uint32_t kFeatureMapVersion = 1;

struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> planes;

    bool operator==(const FeatureMap&) const = default;
};

inline FeatureMap feature_map(const FrameBundle& fb) {
    FeatureMap fm{kEncodingDim, fb.height, fb.width, {}};
    fm.planes.assign(fb.features.begin(), fb.features.end());
    return fm;
}

inline std::vector<char> encode_feature_map(const FeatureMap& fm) {
    detail::ByteWriter w;
    w.bytes("GSFM");
    w.u32(kFeatureMapVersion);
    w.u32(static_cast<std::uint32_t>(fm.channels));
    w.u32(static_cast<std::uint32_t>(fm.height));
    w.u32(static_cast<std::uint32_t>(fm.width));
    for (float v : fm.planes) w.f32(v);
    return w.data();
}

inline FeatureMap decode_feature_map(const std::vector<char>& buf) {
    detail::ByteReader r(buf);
    if (r.bytes(4, "magic") != "GSFM") throw ParseError("bad magic, not a GSFM feature map", 0);
    const std::uint32_t version = r.u32("version");
    if (version != kFeatureMapVersion) throw VersionError(version, kFeatureMapVersion);
    FeatureMap fm;
    fm.channels = static_cast<int>(r.u32("channels"));
    fm.height = static_cast<int>(r.u32("height"));
    fm.width = static_cast<int>(r.u32("width"));
    const std::size_t n = static_cast<std::size_t>(fm.channels) * fm.height * fm.width;
    if (n > r.remaining() / 4) throw ParseError("feature planes exceed file size", r.offset());
    fm.planes.resize(n);
    for (float& v : fm.planes) v = r.f32("feature plane");
    if (r.remaining() != 0) throw ParseError("trailing bytes after feature map", r.offset());
    return fm;
}

inline void write_feature_map(const std::filesystem::path& path, const FeatureMap& fm) {
    detail::write_file_atomic(path, encode_feature_map(fm));
}

inline FeatureMap read_feature_map(const std::filesystem::path& path) {
    return decode_feature_map(detail::read_file(path));
}

} // namespace gsdiff
