#pragma once
// Run manifests: each pipeline run lives in a directory named by a digest of
// the effective configuration and the raw-input digests, so runs with
// different settings never collide.  The manifest records the config
// snapshot, input digests, per-stage output digests, and the pooled cutoffs;
// downstream stages verify their inputs against it and refuse to run on
// stale files.  Wall-clock timings go to a separate file that never enters
// any digest, keeping reruns byte-identical.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hfpanel/config.hpp"
#include "hfpanel/csv.hpp"
#include "hfpanel/io.hpp"
#include "hfpanel/stats.hpp"

namespace hfpanel {

constexpr const char* kToolkitVersion = "hfpanel 1.0.0";

inline std::string digest_bytes(const std::string& bytes) {
    Fnv1a h;
    h.update(bytes);
    return hex64(h.state);
}

inline std::string digest_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for digest: " + path.string());
    Fnv1a h;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h.update(buf, static_cast<size_t>(in.gcount()));
    return hex64(h.state);
}

// Digest of toolkit version + canonical config + named input digests; the
// run directory is "run-<id>".
inline std::string compute_run_id(const Config& cfg,
                                  const std::map<std::string, std::string>& input_digests) {
    Fnv1a h;
    h.update(std::string(kToolkitVersion));
    h.update(std::string("\n"));
    h.update(cfg.canonical());
    for (const auto& [name, digest] : input_digests) {
        h.update(name);
        h.update(std::string("="));
        h.update(digest);
        h.update(std::string("\n"));
    }
    return hex64(h.state);
}

struct RunManifest {
    std::string toolkit = kToolkitVersion;
    std::string run_id;
    std::vector<std::pair<std::string, std::string>> config;        // canonical order
    std::map<std::string, std::string> inputs;                      // name -> digest
    std::map<std::string, std::map<std::string, std::string>> stages;  // stage -> file -> digest
    std::map<std::string, std::string> extra;                       // e.g. cutoffs.q5

    static RunManifest start(const Config& cfg,
                             const std::map<std::string, std::string>& input_digests) {
        RunManifest m;
        m.run_id = compute_run_id(cfg, input_digests);
        for (const auto& [k, v] : cfg.kv) m.config.emplace_back(k, v);
        m.inputs = input_digests;
        return m;
    }

    void record_output(const std::string& stage, const std::string& file,
                       const std::string& digest) {
        stages[stage][file] = digest;
    }

    // The producer stage that recorded `file`, or empty when none has.
    std::string producer_of(const std::string& file) const {
        for (const auto& [stage, outputs] : stages)
            if (outputs.count(file)) return stage;
        return {};
    }

    KvPairs to_kv() const {
        KvPairs kv;
        kv.emplace_back("toolkit", toolkit);
        kv.emplace_back("run_id", run_id);
        for (const auto& [k, v] : config) kv.emplace_back("config." + k, v);
        for (const auto& [k, v] : inputs) kv.emplace_back("input." + k, v);
        for (const auto& [stage, outputs] : stages)
            for (const auto& [file, digest] : outputs)
                kv.emplace_back("stage." + stage + ".output." + file, digest);
        for (const auto& [k, v] : extra) kv.emplace_back(k, v);
        return kv;
    }

    void save(const std::filesystem::path& run_dir) const {
        write_kv(run_dir / "manifest.txt", to_kv());
    }

    static RunManifest load(const std::filesystem::path& run_dir) {
        RunManifest m;
        m.toolkit.clear();
        for (const auto& [key, value] : read_kv(run_dir / "manifest.txt")) {
            if (key == "toolkit") {
                m.toolkit = value;
            } else if (key == "run_id") {
                m.run_id = value;
            } else if (key.starts_with("config.")) {
                m.config.emplace_back(key.substr(7), value);
            } else if (key.starts_with("input.")) {
                m.inputs[key.substr(6)] = value;
            } else if (key.starts_with("stage.")) {
                std::string rest = key.substr(6);
                size_t sep = rest.find(".output.");
                if (sep == std::string::npos)
                    throw std::runtime_error("malformed manifest key: " + key);
                m.stages[rest.substr(0, sep)][rest.substr(sep + 8)] = value;
            } else {
                m.extra[key] = value;
            }
        }
        if (m.run_id.empty()) throw std::runtime_error("manifest missing run_id");
        return m;
    }
};

// Verifies that `file` in `run_dir` exists, was recorded by some earlier
// stage, and still has the recorded digest.  Returns the producer stage.
inline std::string verify_input(const RunManifest& m, const std::filesystem::path& run_dir,
                                const std::string& file) {
    std::string producer = m.producer_of(file);
    if (producer.empty())
        throw std::runtime_error("missing prerequisite: no stage has produced '" + file +
                                 "' in this run directory; run the earlier stages first");
    std::filesystem::path path = run_dir / file;
    if (!std::filesystem::exists(path))
        throw std::runtime_error("stale inputs: '" + file + "' was produced by stage '" +
                                 producer + "' but the file is gone; re-run that stage");
    std::string expect = m.stages.at(producer).at(file);
    std::string got = digest_file(path);
    if (got != expect)
        throw std::runtime_error("stale inputs: '" + file + "' changed since stage '" + producer +
                                 "' wrote it (expected digest " + expect + ", found " + got +
                                 "); re-run that stage");
    return producer;
}

// Per-stage wall times, kept out of every digest.  Loaded and re-saved whole
// so repeated stage invocations update their own line only.
struct StageTimings {
    std::vector<std::pair<std::string, double>> ms;

    void set(const std::string& stage, double value) {
        for (auto& [name, v] : ms)
            if (name == stage) {
                v = value;
                return;
            }
        ms.emplace_back(stage, value);
    }

    void save(const std::filesystem::path& run_dir) const {
        KvPairs kv;
        for (const auto& [name, v] : ms) kv.emplace_back("stage." + name + ".ms", fmt_fixed(v, 1));
        write_kv(run_dir / "timings.txt", kv);
    }

    static StageTimings load_or_empty(const std::filesystem::path& run_dir) {
        StageTimings t;
        std::filesystem::path path = run_dir / "timings.txt";
        if (!std::filesystem::exists(path)) return t;
        for (const auto& [key, value] : read_kv(path)) {
            if (!key.starts_with("stage.") || !key.ends_with(".ms")) continue;
            std::string name = key.substr(6, key.size() - 6 - 3);
            if (auto v = parse_double(value)) t.set(name, *v);
        }
        return t;
    }
};

}  // namespace hfpanel
