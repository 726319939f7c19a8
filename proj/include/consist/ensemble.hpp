#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "consist/dataset.hpp"
#include "consist/error.hpp"
#include "consist/kmeans.hpp"
#include "consist/parallel.hpp"
#include "consist/random.hpp"

namespace consist {

/// Ordered list of cluster counts {k1..kN} used to build an ensemble.
class KSchedule {
public:
    KSchedule() = default;

    static KSchedule list(std::vector<std::size_t> values) {
        KSchedule s;
        s.values_ = std::move(values);
        std::ostringstream desc;
        desc << "list:";
        for (std::size_t i = 0; i < s.values_.size(); ++i) {
            desc << (i ? "," : "") << s.values_[i];
        }
        s.description_ = desc.str();
        return s;
    }

    /// k_min, k_min + step, ... up to and including k_max when it is hit.
    static KSchedule range(std::size_t k_min, std::size_t k_max, std::size_t step = 1) {
        if (step == 0) {
            throw ConfigError("k-schedule step must be positive");
        }
        if (k_min > k_max) {
            throw ConfigError("k-schedule minimum exceeds maximum");
        }
        KSchedule s;
        for (std::size_t k = k_min; k <= k_max; k += step) {
            s.values_.push_back(k);
        }
        s.description_ = "range:" + std::to_string(k_min) + ".." + std::to_string(k_max) + " step " +
                         std::to_string(step);
        return s;
    }

    const std::vector<std::size_t>& values() const noexcept { return values_; }
    const std::string& description() const noexcept { return description_; }
    std::size_t size() const noexcept { return values_.size(); }

    /// Every k distinct and <= n; unless `allow_degenerate`, every k >= 2
    /// and at least two entries.
    void validate(std::size_t n, bool allow_degenerate = false) const {
        if (values_.empty()) {
            throw ConfigError("k-schedule is empty");
        }
        if (!allow_degenerate && values_.size() < 2) {
            throw ConfigError("k-schedule needs at least two entries for pairwise scoring");
        }
        std::set<std::size_t> seen;
        for (auto k : values_) {
            if (k == 0) {
                throw ConfigError("k-schedule contains k=0");
            }
            if (k == 1 && !allow_degenerate) {
                throw ConfigError("k-schedule contains k=1 (allowed only with the degenerate override)");
            }
            if (k > n) {
                throw ConfigError("k-schedule value " + std::to_string(k) + " exceeds n=" + std::to_string(n));
            }
            if (!seen.insert(k).second) {
                throw ConfigError("k-schedule value " + std::to_string(k) + " repeated");
            }
        }
    }

    friend bool operator==(const KSchedule&, const KSchedule&) = default;

private:
    std::vector<std::size_t> values_;
    std::string description_;
};

/// 64-bit FNV-1a over the dimensions and raw bytes of a matrix.
inline std::uint64_t fingerprint(const Matrix& m) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 0x100000001B3ULL;
        }
    };
    const std::uint64_t dims[2] = {m.rows(), m.cols()};
    mix(dims, sizeof(dims));
    mix(m.values().data(), m.values().size() * sizeof(double));
    return h;
}

/// One entry of a point's signature: the centroid of the cluster it was
/// assigned to in some run, together with that cluster's size.
struct SignatureEntry {
    std::span<const double> centroid;
    std::size_t size = 0;
};

struct EnsembleResult {
    std::vector<ClusteringRun> runs;
    KSchedule schedule;
    std::uint64_t master_seed = 0;
    std::uint64_t dataset_fingerprint = 0;

    std::size_t size() const noexcept { return runs.size(); }
    std::size_t points() const noexcept { return runs.empty() ? 0 : runs.front().assignments.size(); }

    std::vector<SignatureEntry> signature(std::size_t point) const {
        if (point >= points()) {
            throw UsageError("point index " + std::to_string(point) + " out of range (n=" +
                             std::to_string(points()) + ")");
        }
        std::vector<SignatureEntry> out;
        out.reserve(runs.size());
        for (const auto& run : runs) {
            const auto c = run.assignments[point];
            out.push_back({run.centroids.row(c), run.sizes[c]});
        }
        return out;
    }

    friend bool operator==(const EnsembleResult&, const EnsembleResult&) = default;
};

struct EnsembleOptions {
    KMeansConfig kmeans;
    /// Concurrent k-means runs; 0 = hardware threads.
    std::size_t workers = 0;
    /// Permit k=1 entries and single-run schedules.
    bool allow_degenerate = false;
};

/// Seed of run j in an ensemble built from `master`.
inline std::uint64_t run_seed(std::uint64_t master, std::size_t j) noexcept { return derive_seed(master, j); }

inline EnsembleResult run_ensemble(const LabeledDataset& ds, const KSchedule& schedule, std::uint64_t seed,
                                   const EnsembleOptions& options = {}) {
    schedule.validate(ds.size(), options.allow_degenerate);
    EnsembleResult result;
    result.schedule = schedule;
    result.master_seed = seed;
    result.dataset_fingerprint = fingerprint(ds.features);
    result.runs.resize(schedule.size());
    parallel_for(schedule.size(), options.workers, [&](std::size_t j) {
        result.runs[j] = fit_kmeans(ds.features, schedule.values()[j], run_seed(seed, j), options.kmeans);
    });
    return result;
}

/// Writes `manifest.txt` plus run_<j>_{assignments,centroids}.csv into `dir`.
inline void save_ensemble(const std::filesystem::path& dir, const EnsembleResult& er) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / "manifest.txt", std::ios::binary);
    if (!manifest) {
        throw ConfigError("cannot write ensemble manifest in '" + dir.string() + "'");
    }
    manifest << "schedule=" << er.schedule.description() << '\n';
    manifest << "k_values=";
    for (std::size_t j = 0; j < er.schedule.size(); ++j) {
        manifest << (j ? "," : "") << er.schedule.values()[j];
    }
    manifest << '\n';
    manifest << "master_seed=" << er.master_seed << '\n';
    manifest << "fingerprint=" << er.dataset_fingerprint << '\n';
    manifest << "runs=" << er.runs.size() << '\n';
    for (std::size_t j = 0; j < er.runs.size(); ++j) {
        const auto& run = er.runs[j];
        manifest << "run." << j << ".seed=" << run.seed << '\n';
        manifest << "run." << j << ".inertia=" << detail::format_double(run.inertia) << '\n';
        manifest << "run." << j << ".iterations=" << run.iterations << '\n';
        write_run(dir / ("run_" + std::to_string(j)), run);
    }
}

namespace detail {

inline std::map<std::string, std::string> read_key_values(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError("expected key=value, got '" + std::string(t) + "'");
        }
        out[std::string(trim(t.substr(0, eq)))] = std::string(trim(t.substr(eq + 1)));
    }
    return out;
}

inline std::uint64_t parse_u64(const std::string& text, const std::string& what) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ParseError(what + ": expected a non-negative integer, got '" + text + "'");
    }
    return v;
}

inline std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
    std::vector<std::size_t> out;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ',')) {
        out.push_back(static_cast<std::size_t>(parse_u64(std::string(trim(item)), what)));
    }
    return out;
}

}  // namespace detail

inline EnsembleResult load_ensemble(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.txt", std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open ensemble manifest in '" + dir.string() + "'");
    }
    auto kv = detail::read_key_values(in);
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) {
            throw StructuralError("ensemble manifest lacks '" + key + "'");
        }
        return it->second;
    };

    EnsembleResult er;
    er.schedule = KSchedule::list(detail::parse_size_list(get("k_values"), "k_values"));
    er.master_seed = detail::parse_u64(get("master_seed"), "master_seed");
    er.dataset_fingerprint = detail::parse_u64(get("fingerprint"), "fingerprint");
    const auto count = detail::parse_u64(get("runs"), "runs");
    if (count != er.schedule.size()) {
        throw StructuralError("ensemble manifest run count disagrees with schedule");
    }
    for (std::size_t j = 0; j < count; ++j) {
        auto run = read_run(dir / ("run_" + std::to_string(j)));
        const std::string key = "run." + std::to_string(j) + ".";
        run.seed = detail::parse_u64(get(key + "seed"), key + "seed");
        run.iterations = detail::parse_u64(get(key + "iterations"), key + "iterations");
        run.inertia = detail::parse_cell(get(key + "inertia"), 0, 0);
        if (run.k != er.schedule.values()[j]) {
            throw StructuralError("run " + std::to_string(j) + " has k=" + std::to_string(run.k) +
                                  " but the schedule says " + std::to_string(er.schedule.values()[j]));
        }
        if (!er.runs.empty() && run.assignments.size() != er.runs.front().assignments.size()) {
            throw StructuralError("runs disagree on the number of points");
        }
        er.runs.push_back(std::move(run));
    }
    return er;
}

}  // namespace consist
