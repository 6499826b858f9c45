#pragma once
// Minimal delimited-text helpers: file slurping, line splitting, and
// locale-independent numeric formatting (std::to_chars round-trip for doubles)
// so identical runs produce identical bytes.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hfpanel {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
    if (!out) throw std::runtime_error("short write: " + path);
}

// Calls fn(line_number, line) for every line; tolerates missing trailing newline
// and strips '\r'. Streams the file, so multi-GB inputs are fine.
inline void for_each_line(const std::string& path,
                          const std::function<void(size_t, std::string_view)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string line;
    size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        std::string_view v = line;
        if (!v.empty() && v.back() == '\r') v.remove_suffix(1);
        fn(no, v);
    }
}

// Splits on `sep` into at most `fields.size()` pieces; returns false when the
// column count differs. No quoting: the formats written/read here never need it.
inline bool split_fields(std::string_view line, char sep, std::vector<std::string_view>& fields) {
    size_t want = fields.size();
    size_t idx = 0;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == sep) {
            if (idx >= want) return false;
            fields[idx++] = line.substr(start, i - start);
            start = i + 1;
        }
    }
    return idx == want;
}

// Splits on `sep` into however many pieces the line holds.
inline std::vector<std::string_view> split_any(std::string_view line, char sep) {
    std::vector<std::string_view> fields;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == sep) {
            fields.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return fields;
}

inline std::optional<double> parse_double(std::string_view s) {
    double v;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<int64_t> parse_int(std::string_view s) {
    int64_t v;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

// Shortest round-trip representation; deterministic and locale-free.
inline std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// Fixed decimals, for human-facing tables.
inline std::string fmt_fixed(double v, int decimals) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
    return std::string(buf, res.ptr);
}

}  // namespace hfpanel
