#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "consist/consistency.hpp"
#include "consist/error.hpp"
#include "consist/kmeans.hpp"
#include "consist/matrix.hpp"
#include "consist/parallel.hpp"

namespace consist {

inline constexpr std::size_t kDefaultSilhouetteCap = 20000;

/// Mean silhouette (Euclidean). Singleton clusters contribute 0, as do
/// points with a = b = 0. Quadratic in n, hence the cap.
inline double silhouette(const Matrix& points, std::span<const std::uint32_t> assignments, std::size_t k,
                         std::size_t cap = kDefaultSilhouetteCap, std::size_t workers = 0) {
    const std::size_t n = points.rows();
    if (k < 2) {
        throw UsageError("silhouette needs at least two clusters");
    }
    if (assignments.size() != n) {
        throw UsageError("silhouette: assignment count does not match the number of points");
    }
    if (n > cap) {
        throw CapacityError("silhouette is O(n^2): n=" + std::to_string(n) + " exceeds the cap of " +
                            std::to_string(cap) + "; subsample the data first");
    }
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assignments) {
        if (a >= k) {
            throw UsageError("silhouette: assignment out of range");
        }
        ++sizes[a];
    }
    if (std::any_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s == 0; })) {
        throw UsageError("silhouette: every cluster must be non-empty");
    }

    std::vector<double> per_point(n, 0.0);
    parallel_blocks(n, workers, [&](std::size_t begin, std::size_t end) {
        std::vector<double> sums(k);
        for (std::size_t i = begin; i < end; ++i) {
            const auto own = assignments[i];
            if (sizes[own] == 1) {
                continue;
            }
            std::fill(sums.begin(), sums.end(), 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) {
                    sums[assignments[j]] += std::sqrt(squared_distance(points.row(i), points.row(j)));
                }
            }
            const double a = sums[own] / static_cast<double>(sizes[own] - 1);
            double b = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                if (c != own) {
                    b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
                }
            }
            const double denom = std::max(a, b);
            per_point[i] = denom > 0.0 ? (b - a) / denom : 0.0;
        }
    });
    double total = 0.0;
    for (double s : per_point) {
        total += s;
    }
    return total / static_cast<double>(n);
}

inline double silhouette(const Matrix& points, const ClusteringRun& run, std::size_t cap = kDefaultSilhouetteCap,
                         std::size_t workers = 0) {
    return silhouette(points, run.assignments, run.k, cap, workers);
}

/// Share of the total variance held by each column, in percent.
inline std::vector<double> variance_share(const Matrix& x) {
    const std::size_t n = x.rows();
    if (n < 2) {
        throw UsageError("variance_share needs at least two rows");
    }
    std::vector<double> var(x.cols(), 0.0);
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean += x(i, j);
        }
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ss += (x(i, j) - mean) * (x(i, j) - mean);
        }
        var[j] = ss / static_cast<double>(n - 1);
    }
    double total = 0.0;
    for (double v : var) {
        total += v;
    }
    for (double& v : var) {
        v = total > 0.0 ? 100.0 * v / total : 100.0 / static_cast<double>(var.size());
    }
    return var;
}

struct PurityRow {
    double threshold = 0.0;
    std::size_t tn_above = 0;
    std::size_t tp_above = 0;
};

/// Inliers and outliers with consistency score strictly above each threshold.
inline std::vector<PurityRow> purity_table(const ScoreVector& consistency, std::span<const std::uint8_t> labels,
                                           std::span<const double> thresholds) {
    if (consistency.direction != Direction::high_is_consistent) {
        throw UsageError("purity_table expects consistency scores (high_is_consistent)");
    }
    if (consistency.size() != labels.size()) {
        throw UsageError("purity_table: score/label length mismatch");
    }
    std::vector<PurityRow> rows;
    rows.reserve(thresholds.size());
    for (double t : thresholds) {
        PurityRow row{t, 0, 0};
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (consistency.scores[i] > t) {
                (labels[i] ? row.tp_above : row.tn_above)++;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace consist
