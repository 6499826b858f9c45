#pragma once
// Delimited text tables: one optional block of '#' comment lines, then a
// header row, then data rows, tab-separated.  Numeric cells are written in
// shortest round-trip form so a file re-read reproduces the in-memory values
// bit for bit — stage outputs stay byte-identical across reruns.

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hfpanel/csv.hpp"

namespace hfpanel {

struct TextTable {
    std::vector<std::string> comments;  // without the leading "# "
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    size_t column(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::runtime_error("table has no column '" + name + "'");
    }
};

inline void write_table(const std::filesystem::path& path, const TextTable& table) {
    std::string out;
    for (const std::string& c : table.comments) out += "# " + c + "\n";
    for (size_t i = 0; i < table.header.size(); ++i) {
        if (i) out += '\t';
        out += table.header[i];
    }
    out += '\n';
    for (const std::vector<std::string>& row : table.rows) {
        if (row.size() != table.header.size())
            throw std::runtime_error("table row width mismatch writing " + path.string());
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out += '\t';
            out += row[i];
        }
        out += '\n';
    }
    write_file(path.string(), out);
}

inline TextTable read_table(const std::filesystem::path& path) {
    TextTable table;
    bool have_header = false;
    std::vector<std::string_view> fields;
    for_each_line(path.string(), [&](size_t line_no, std::string_view line) {
        if (!line.empty() && line.front() == '#') {
            size_t start = line.size() > 1 && line[1] == ' ' ? 2 : 1;
            table.comments.emplace_back(line.substr(start));
            return;
        }
        if (!have_header) {
            for (std::string_view f : split_any(line, '\t')) table.header.emplace_back(f);
            fields.resize(table.header.size());
            have_header = true;
            return;
        }
        if (!split_fields(line, '\t', fields))
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": wrong column count");
        std::vector<std::string> row;
        row.reserve(fields.size());
        for (std::string_view f : fields) row.emplace_back(f);
        table.rows.push_back(std::move(row));
    });
    if (!have_header) throw std::runtime_error("empty table: " + path.string());
    return table;
}

// Structured key -> value text ("key = value" per line, '#' comments).
// Order-preserving so files stay deterministic and human-diffable.
using KvPairs = std::vector<std::pair<std::string, std::string>>;

inline void write_kv(const std::filesystem::path& path, const KvPairs& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    write_file(path.string(), out);
}

inline KvPairs read_kv(const std::filesystem::path& path) {
    KvPairs kv;
    for_each_line(path.string(), [&](size_t line_no, std::string_view line) {
        if (line.empty() || line.front() == '#') return;
        size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": bad key-value line");
        auto trim = [](std::string_view s) {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
            return s;
        };
        kv.emplace_back(std::string(trim(line.substr(0, eq))),
                        std::string(trim(line.substr(eq + 1))));
    });
    return kv;
}

}  // namespace hfpanel
