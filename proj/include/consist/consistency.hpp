#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "consist/dataset.hpp"
#include "consist/ensemble.hpp"
#include "consist/error.hpp"
#include "consist/parallel.hpp"

namespace consist {

enum class Direction { high_is_consistent, high_is_outlier };

inline std::string_view to_string(Direction d) noexcept {
    return d == Direction::high_is_consistent ? "high_is_consistent" : "high_is_outlier";
}

inline Direction parse_direction(std::string_view name) {
    if (name == "high_is_consistent") return Direction::high_is_consistent;
    if (name == "high_is_outlier") return Direction::high_is_outlier;
    throw ParseError("unknown score direction '" + std::string(name) + "'");
}

/// Where a score vector came from; written into reports for replay.
struct ScoreSource {
    std::string method;
    std::string schedule;
    std::uint64_t seed = 0;
    /// Centroids with zero norm seen while scoring (cosine taken as 0).
    std::size_t zero_norm_centroids = 0;
};

struct ScoreVector {
    std::vector<double> scores;
    Direction direction = Direction::high_is_outlier;
    ScoreSource source;

    std::size_t size() const noexcept { return scores.size(); }
};

/// Cosine similarity with cos(x, 0) defined as 0.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) noexcept {
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot(a, b) / (na * nb);
}

/// Size-weighted average pairwise cosine similarity of each point's
/// centroids:
///
///     score = sum_{i<j} (n_i + n_j) cos(C_i, C_j) / sum_{i<j} (n_i + n_j)
///
/// where C_i is the centroid of the point's cluster in run i and n_i that
/// cluster's size. Pairs are visited in (i, j) order with i < j so results
/// are reproducible bit for bit.
inline ScoreVector consistency_scores(const EnsembleResult& er, std::size_t workers = 0) {
    const std::size_t runs = er.size();
    if (runs < 2) {
        throw ConfigError("consistency scoring needs at least two ensemble runs");
    }
    const std::size_t n = er.points();

    // Cosine of every centroid pair depends only on (run i, cluster a, run j,
    // cluster b), so it is tabulated once per run pair.
    std::vector<std::vector<double>> norms(runs);
    std::size_t zero_norms = 0;
    for (std::size_t r = 0; r < runs; ++r) {
        const auto& c = er.runs[r].centroids;
        norms[r].resize(c.rows());
        for (std::size_t a = 0; a < c.rows(); ++a) {
            norms[r][a] = std::sqrt(dot(c.row(a), c.row(a)));
            zero_norms += norms[r][a] == 0.0 ? 1 : 0;
        }
    }
    struct PairTable {
        std::size_t i, j, cols;
        std::vector<double> cosine;
    };
    std::vector<PairTable> tables;
    tables.reserve(runs * (runs - 1) / 2);
    for (std::size_t i = 0; i + 1 < runs; ++i) {
        for (std::size_t j = i + 1; j < runs; ++j) {
            const auto& ci = er.runs[i].centroids;
            const auto& cj = er.runs[j].centroids;
            PairTable t{i, j, cj.rows(), std::vector<double>(ci.rows() * cj.rows())};
            for (std::size_t a = 0; a < ci.rows(); ++a) {
                for (std::size_t b = 0; b < cj.rows(); ++b) {
                    const double denom = norms[i][a] * norms[j][b];
                    t.cosine[a * t.cols + b] = denom == 0.0 ? 0.0 : dot(ci.row(a), cj.row(b)) / denom;
                }
            }
            tables.push_back(std::move(t));
        }
    }

    ScoreVector out;
    out.direction = Direction::high_is_consistent;
    out.source = {"consistency", er.schedule.description(), er.master_seed, zero_norms};
    out.scores.resize(n);
    parallel_blocks(n, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            double weighted = 0.0;
            double total = 0.0;
            for (const auto& t : tables) {
                const auto a = er.runs[t.i].assignments[p];
                const auto b = er.runs[t.j].assignments[p];
                const double w =
                    static_cast<double>(er.runs[t.i].sizes[a]) + static_cast<double>(er.runs[t.j].sizes[b]);
                weighted += w * t.cosine[a * t.cols + b];
                total += w;
            }
            out.scores[p] = total > 0.0 ? weighted / total : 0.0;
        }
    });
    return out;
}

/// 1 - score; turns a consistency score into an outlier score.
inline ScoreVector outlier_scores(const ScoreVector& sv) {
    if (sv.direction != Direction::high_is_consistent) {
        throw UsageError("outlier_scores expects consistency scores (high_is_consistent)");
    }
    ScoreVector out;
    out.direction = Direction::high_is_outlier;
    out.source = sv.source;
    out.scores.reserve(sv.size());
    for (double s : sv.scores) {
        out.scores.push_back(1.0 - s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Score files: row_id,score,direction
// ---------------------------------------------------------------------------

/// Rows are written sorted by row id, i.e. in the original input order.
inline void write_scores(std::ostream& out, const ScoreVector& sv, std::span<const std::size_t> row_ids) {
    if (row_ids.size() != sv.size()) {
        throw UsageError("write_scores: " + std::to_string(row_ids.size()) + " row ids for " +
                         std::to_string(sv.size()) + " scores");
    }
    std::vector<std::size_t> order(sv.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row_ids[a] < row_ids[b]; });
    out << "row_id,score,direction\n";
    const auto dir = to_string(sv.direction);
    for (auto i : order) {
        out << row_ids[i] << ',' << detail::format_double(sv.scores[i]) << ',' << dir << '\n';
    }
}

struct ScoreFile {
    std::vector<std::size_t> row_ids;
    ScoreVector scores;
};

inline ScoreFile read_scores(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "row_id,score,direction") {
        throw StructuralError("score file must start with 'row_id,score,direction'");
    }
    ScoreFile out;
    bool first = true;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos) {
            throw StructuralError("line " + std::to_string(line_no) + ": expected 3 fields");
        }
        out.row_ids.push_back(static_cast<std::size_t>(detail::parse_cell(line.substr(0, c1), line_no, 0)));
        out.scores.scores.push_back(detail::parse_cell(line.substr(c1 + 1, c2 - c1 - 1), line_no, 1));
        const auto dir = parse_direction(detail::trim(std::string_view(line).substr(c2 + 1)));
        if (first) {
            out.scores.direction = dir;
            first = false;
        } else if (dir != out.scores.direction) {
            throw StructuralError("line " + std::to_string(line_no) + ": mixed score directions");
        }
    }
    return out;
}

}  // namespace consist
