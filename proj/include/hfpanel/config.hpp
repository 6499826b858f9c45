#pragma once
// Plain-text key=value configuration, with '#' comments. The canonical
// serialization (sorted keys) feeds the run-id digest, so any effective
// config change lands in a fresh run directory.

#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "csv.hpp"
#include "time.hpp"

namespace hfpanel {

struct Config {
    std::map<std::string, std::string> kv;

    static Config from_string(const std::string& text) {
        Config c;
        std::istringstream in(text);
        std::string line;
        size_t no = 0;
        while (std::getline(in, line)) {
            ++no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            size_t h = line.find('#');
            if (h != std::string::npos) line.erase(h);
            size_t a = line.find_first_not_of(" \t");
            if (a == std::string::npos) continue;
            size_t b = line.find_last_not_of(" \t");
            std::string body = line.substr(a, b - a + 1);
            size_t eq = body.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config line " + std::to_string(no) + ": expected key=value");
            std::string key = body.substr(0, eq);
            std::string val = body.substr(eq + 1);
            while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
            size_t vs = val.find_first_not_of(" \t");
            val = vs == std::string::npos ? "" : val.substr(vs);
            if (key.empty())
                throw std::runtime_error("config line " + std::to_string(no) + ": empty key");
            c.kv[key] = val;
        }
        return c;
    }

    static Config from_file(const std::string& path) { return from_string(read_file(path)); }

    bool has(const std::string& key) const { return kv.count(key) != 0; }
    void set(const std::string& key, const std::string& val) { kv[key] = val; }

    std::string get_str(const std::string& key, const std::string& dflt) const {
        auto it = kv.find(key);
        return it == kv.end() ? dflt : it->second;
    }
    std::string require_str(const std::string& key) const {
        auto it = kv.find(key);
        if (it == kv.end()) throw std::runtime_error("config: missing required key '" + key + "'");
        return it->second;
    }
    int64_t get_int(const std::string& key, int64_t dflt) const {
        auto it = kv.find(key);
        if (it == kv.end()) return dflt;
        auto v = parse_int(it->second);
        if (!v) throw std::runtime_error("config: key '" + key + "' is not an integer");
        return *v;
    }
    double get_double(const std::string& key, double dflt) const {
        auto it = kv.find(key);
        if (it == kv.end()) return dflt;
        auto v = parse_double(it->second);
        if (!v) throw std::runtime_error("config: key '" + key + "' is not a number");
        return *v;
    }
    // Date value as civil day number.
    int32_t get_date(const std::string& key, int32_t dflt) const {
        auto it = kv.find(key);
        if (it == kv.end()) return dflt;
        auto v = parse_date(it->second);
        if (!v) throw std::runtime_error("config: key '" + key + "' is not a date (YYYY-MM-DD)");
        return *v;
    }
    std::vector<std::string> get_list(const std::string& key) const {
        std::vector<std::string> out;
        auto it = kv.find(key);
        if (it == kv.end()) return out;
        std::string cur;
        for (char ch : it->second) {
            if (ch == ',') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else if (ch != ' ') {
                cur.push_back(ch);
            }
        }
        if (!cur.empty()) out.push_back(cur);
        return out;
    }

    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : kv) {
            out += k;
            out += '=';
            out += v;
            out += '\n';
        }
        return out;
    }
};

// Manual per-ticker exclusions: `exclude TICKER` drops the ticker outright,
// `truncate TICKER YYYY-MM-DD` keeps only observations strictly before the date.
struct ExclusionList {
    std::vector<std::string> exclude;
    std::vector<std::pair<std::string, int32_t>> truncate;

    static ExclusionList from_file(const std::string& path) {
        ExclusionList xs;
        for_each_line(path, [&](size_t no, std::string_view line) {
            size_t a = line.find_first_not_of(" \t");
            if (a == std::string_view::npos || line[a] == '#') return;
            std::istringstream ss{std::string(line)};
            std::string verb, ticker, date;
            ss >> verb >> ticker;
            if (verb == "exclude" && !ticker.empty()) {
                xs.exclude.push_back(ticker);
            } else if (verb == "truncate" && (ss >> date)) {
                auto d = parse_date(date);
                if (!d)
                    throw std::runtime_error("exclusion list line " + std::to_string(no) +
                                             ": bad date '" + date + "'");
                xs.truncate.emplace_back(ticker, *d);
            } else {
                throw std::runtime_error("exclusion list line " + std::to_string(no) +
                                         ": expected 'exclude T' or 'truncate T DATE'");
            }
        });
        return xs;
    }
};

}  // namespace hfpanel
