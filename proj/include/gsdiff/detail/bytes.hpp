// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "gsdiff/error.hpp"

namespace gsdiff::detail {

/// Little-endian byte sink.
class ByteWriter {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

    template <class T>
    void uint(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }

    void u8(std::uint8_t v) { uint(v); }
    void u32(std::uint32_t v) { uint(v); }
    void u64(std::uint64_t v) { uint(v); }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }

    const std::vector<char>& data() const { return buf_; }

private:
    std::vector<char> buf_;
};

/// Little-endian byte source that reports the offset of any short read.
class ByteReader {
public:
    explicit ByteReader(const std::vector<char>& buf) : buf_(buf) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) throw ParseError(std::string("truncated input while reading ") + what, pos_);
    }

    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string s(buf_.begin() + static_cast<std::ptrdiff_t>(pos_), buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return s;
    }

    template <class T>
    T uint(const char* what) {
        need(sizeof(T), what);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i));
        }
        pos_ += sizeof(T);
        return v;
    }

    std::uint8_t u8(const char* what) { return uint<std::uint8_t>(what); }
    std::uint32_t u32(const char* what) { return uint<std::uint32_t>(what); }
    std::uint64_t u64(const char* what) { return uint<std::uint64_t>(what); }
    double f64(const char* what) { return std::bit_cast<double>(uint<std::uint64_t>(what)); }
    float f32(const char* what) { return std::bit_cast<float>(uint<std::uint32_t>(what)); }

private:
    const std::vector<char>& buf_;
    std::size_t pos_ = 0;
};

inline std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a partially written file at `path`.
inline void write_file_atomic(const std::filesystem::path& path, const char* data, std::size_t size) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(data, static_cast<std::streamsize>(size));
        if (!out) throw IoError("short write to '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
    }
}

inline void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& data) {
    write_file_atomic(path, data.data(), data.size());
}

inline void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
    write_file_atomic(path, text.data(), text.size());
}

} // namespace gsdiff::detail
