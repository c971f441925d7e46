#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "stegdiff/errors.hpp"

namespace stegdiff {

/// A (channels, height, width) block of real components in row-major order.
struct NoiseTensor {
    std::array<std::uint32_t, 3> shape{0, 0, 0};
    std::vector<double> values;

    NoiseTensor() = default;
    NoiseTensor(std::uint32_t c, std::uint32_t h, std::uint32_t w)
        : shape{c, h, w}, values(static_cast<std::size_t>(c) * h * w, 0.0) {}
    explicit NoiseTensor(const std::array<std::uint32_t, 3>& s)
        : NoiseTensor(s[0], s[1], s[2]) {}

    std::size_t dims() const {
        return static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
    }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

namespace nt_format {
// File layout:
//   bytes  0..7   magic "STGNTNSR"
//   bytes  8..11  u32 version (currently 1)
//   bytes 12..15  u32 flags (bit 0: extension block present)
//   3 x u32       shape (channels, height, width), little endian
//   [u32 ext_len + ext_len bytes]   optional JSON extension (manifest)
//   dims x f64    values, little endian, row major
inline constexpr char magic[8] = {'S', 'T', 'G', 'N', 'T', 'N', 'S', 'R'};
inline constexpr std::uint32_t version = 1;
inline constexpr std::uint32_t flag_extension = 1u;
} // namespace nt_format

static_assert(sizeof(double) == 8, "IEEE-754 binary64 required");

namespace detail {

inline void write_u32(std::FILE* f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    if (std::fwrite(b, 1, 4, f) != 4) throw io_error("tensor write failed");
}

inline std::uint32_t read_u32(std::FILE* f) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4) throw io_error("tensor file truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f64(std::FILE* f, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
    if (std::fwrite(b, 1, 8, f) != 8) throw io_error("tensor write failed");
}

inline double read_f64(std::FILE* f) {
    unsigned char b[8];
    if (std::fread(b, 1, 8, f) != 8) throw io_error("tensor file truncated");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};

} // namespace detail

/// Write atomically (temp file + rename). `extension` is an optional JSON
/// manifest embedded in the header extension block.
inline void save_tensor(const std::filesystem::path& path, const NoiseTensor& t,
                        const std::string& extension = "") {
    namespace fs = std::filesystem;
    const fs::path tmp = path.string() + ".tmp";
    {
        std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(tmp.string().c_str(), "wb"));
        if (!f) throw io_error("cannot open for writing: " + tmp.string());
        if (std::fwrite(nt_format::magic, 1, 8, f.get()) != 8)
            throw io_error("tensor write failed");
        detail::write_u32(f.get(), nt_format::version);
        detail::write_u32(f.get(), extension.empty() ? 0u : nt_format::flag_extension);
        for (auto s : t.shape) detail::write_u32(f.get(), s);
        if (!extension.empty()) {
            detail::write_u32(f.get(), static_cast<std::uint32_t>(extension.size()));
            if (std::fwrite(extension.data(), 1, extension.size(), f.get()) != extension.size())
                throw io_error("tensor write failed");
        }
        for (double v : t.values) detail::write_f64(f.get(), v);
        if (std::fflush(f.get()) != 0) throw io_error("tensor flush failed");
    }
    fs::rename(tmp, path);
}

inline NoiseTensor load_tensor(const std::filesystem::path& path,
                               std::string* extension_out = nullptr) {
    std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.string().c_str(), "rb"));
    if (!f) throw io_error("cannot open tensor file: " + path.string());
    char magic[8];
    if (std::fread(magic, 1, 8, f.get()) != 8 || std::memcmp(magic, nt_format::magic, 8) != 0)
        throw io_error("not a noise-tensor file: " + path.string());
    const std::uint32_t version = detail::read_u32(f.get());
    if (version != nt_format::version)
        throw io_error("unsupported noise-tensor version " + std::to_string(version));
    const std::uint32_t flags = detail::read_u32(f.get());
    NoiseTensor t;
    for (auto& s : t.shape) s = detail::read_u32(f.get());
    if (flags & nt_format::flag_extension) {
        const std::uint32_t len = detail::read_u32(f.get());
        std::string ext(len, '\0');
        if (len && std::fread(ext.data(), 1, len, f.get()) != len)
            throw io_error("tensor file truncated");
        if (extension_out) *extension_out = std::move(ext);
    } else if (extension_out) {
        extension_out->clear();
    }
    t.values.resize(t.dims());
    for (auto& v : t.values) v = detail::read_f64(f.get());
    return t;
}

/// FNV-1a over raw bytes; used for schedule fingerprints and config hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

} // namespace stegdiff
