#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "stegdiff/errors.hpp"

namespace stegdiff {

/// CSV number dialect: '.' decimal separator, scientific notation for
/// |x| < 1e-3 (and nonzero), fixed otherwise. Deterministic across runs.
inline std::string csv_number(double x, int decimals = 6) {
    char buf[64];
    if (x != 0.0 && std::abs(x) < 1e-3)
        std::snprintf(buf, sizeof buf, "%.*e", decimals, x);
    else
        std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
    return buf;
}

/// Row-buffered CSV writer with atomic emission (temp file + rename).
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) {
        rows_.push_back(join(header));
    }

    void add_row(const std::vector<std::string>& cells) { rows_.push_back(join(cells)); }

    std::string str() const {
        std::string out;
        for (const auto& r : rows_) {
            out += r;
            out += '\n';
        }
        return out;
    }

    void write(const std::filesystem::path& path) const {
        namespace fs = std::filesystem;
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        const fs::path tmp = path.string() + ".tmp";
        {
            std::FILE* f = std::fopen(tmp.string().c_str(), "wb");
            if (!f) throw io_error("cannot open for writing: " + tmp.string());
            const std::string body = str();
            const std::size_t n = std::fwrite(body.data(), 1, body.size(), f);
            std::fclose(f);
            if (n != body.size()) throw io_error("short write: " + tmp.string());
        }
        fs::rename(tmp, path);
    }

private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string out;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        return out;
    }

    std::vector<std::string> rows_;
};

/// Atomic plain-text write, shared by the CLI outputs.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& body) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    std::FILE* f = std::fopen(tmp.string().c_str(), "wb");
    if (!f) throw io_error("cannot open for writing: " + tmp.string());
    const std::size_t n = std::fwrite(body.data(), 1, body.size(), f);
    std::fclose(f);
    if (n != body.size()) throw io_error("short write: " + tmp.string());
    fs::rename(tmp, path);
}

} // namespace stegdiff
